#include <doctest.h>

#include <cmath>

#include "blev/experiments.hpp"
#include "blev/martingales.hpp"
#include "blev/rng.hpp"
#include "blev/spectral.hpp"
#include "blev/stats.hpp"

using namespace blev;
namespace mc = blev::mc;
namespace st = blev::stats;

TEST_CASE("run_replicas: one replica equals simulate directly") {
    const BranchingModel m = binary_bbm();
    SimConfig cfg;
    cfg.snapshot_times = {1.0, 2.0};
    mc::MartingaleRequest req;
    req.thetas = {0.5};
    req.with_M = true;
    const auto rows = mc::run_replicas(m, cfg, 1, 42, req, 1);
    REQUIRE(rows.size() == 1);

    cfg.rng_stream = 0;
    const auto tree = simulate(m, cfg, 42);
    for (std::size_t i = 0; i < tree.snapshots.size(); ++i) {
        CHECK(rows[0][i].mass == tree.snapshots[i].positions.size());
        CHECK(rows[0][i].W[0].second ==
              martingales::additive_W(tree.snapshots[i], m, 0.5));
        CHECK(*rows[0][i].M == *martingales::maximum_M(tree.snapshots[i]));
    }
}

TEST_CASE("run_replicas: 1 worker vs 8 workers, bit-identical aggregate") {
    const BranchingModel m = local_zeta_bbm(2.5);
    SimConfig cfg;
    cfg.snapshot_times = {1.0, 2.0};
    mc::MartingaleRequest req;
    req.thetas = {0.3, 0.6};
    req.with_M = true;
    const auto a = mc::run_replicas(m, cfg, 400, 7, req, 1);
    const auto b = mc::run_replicas(m, cfg, 400, 7, req, 8);
    REQUIRE(a.size() == b.size());
    for (std::size_t r = 0; r < a.size(); ++r)
        for (std::size_t i = 0; i < a[r].size(); ++i) {
            CHECK(a[r][i].mass == b[r][i].mass);
            for (std::size_t j = 0; j < a[r][i].W.size(); ++j)
                CHECK(a[r][i].W[j].second == b[r][i].W[j].second); // exact
            CHECK(*a[r][i].M == *b[r][i].M);
        }
}

TEST_CASE("run_replicas: Galton-Watson mean mass oracle") {
    const BranchingModel m = binary_bbm();
    SimConfig cfg;
    cfg.snapshot_times = {3.0};
    mc::MartingaleRequest req;
    const auto rows = mc::run_replicas(m, cfg, 10000, 2026, req, 0);
    std::vector<double> mass(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) mass[r] = rows[r][0].mass;
    CHECK(std::abs(st::mean(mass) - std::exp(3.0)) < 3.0 * st::stderr_of_mean(mass));
}

TEST_CASE("run_replicas: explosion carries the replica index") {
    const BranchingModel m = binary_bbm();
    SimConfig cfg;
    cfg.snapshot_times = {8.0};
    cfg.max_particles = 16;
    mc::MartingaleRequest req;
    CHECK_THROWS_AS(mc::run_replicas(m, cfg, 50, 3, req, 2), ExplosionError);
}

TEST_CASE("experiment gating cites the clause") {
    mc::ExperimentSpec spec;
    spec.experiment_id = "normal_clt";
    spec.model = binary_bbm();
    spec.params.theta = 1.3; // kappa(2.6) = 4.38 >= 2 kappa(1.3) = 3.69
    spec.params.replicas = 200;
    try {
        mc::run_experiment(spec, 1);
        FAIL("expected ConditionError");
    } catch (const ConditionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("H2") != std::string::npos);
        CHECK(msg.find("kappa(2*theta)") != std::string::npos);
    }
}

TEST_CASE("experiment config validation") {
    mc::ExperimentSpec spec;
    spec.experiment_id = "mean_one";
    spec.model = binary_bbm();
    spec.params.replicas = 10;
    CHECK_THROWS_AS(mc::run_experiment(spec, 1), ConfigError);

    spec.experiment_id = "not_an_experiment";
    spec.params.replicas = 200;
    CHECK_THROWS_AS(mc::run_experiment(spec, 1), ConfigError);
}

TEST_CASE("seed determinism: identical spec, identical report modulo wall time") {
    mc::ExperimentSpec spec;
    spec.experiment_id = "mean_one";
    spec.model = binary_bbm();
    spec.params.thetas = {0.5};
    spec.params.t = 2.0;
    spec.params.replicas = 500;
    spec.seed = 99;
    const auto a = mc::run_experiment(spec, 1);
    const auto b = mc::run_experiment(spec, 4);
    REQUIRE(a.estimates.size() == b.estimates.size());
    for (std::size_t i = 0; i < a.estimates.size(); ++i) {
        CHECK(a.estimates[i].first == b.estimates[i].first);
        CHECK(a.estimates[i].second.value == b.estimates[i].second.value);
    }
    CHECK(a.pass == b.pass);
    CHECK(a.provenance.config_digest == b.provenance.config_digest);
}

TEST_CASE("mean_one smoke run passes on the binary model") {
    mc::ExperimentSpec spec;
    spec.experiment_id = "mean_one";
    spec.model = binary_bbm();
    spec.params.thetas = {0.25, 0.5};
    spec.params.t = 2.0;
    spec.params.replicas = 2000;
    const auto rep = mc::run_experiment(spec, 0);
    CHECK(rep.pass);
    CHECK(rep.provenance.replicas == 2000);
}

TEST_CASE("rightmost_decay medians decrease") {
    mc::ExperimentSpec spec;
    spec.experiment_id = "rightmost_decay";
    spec.model = binary_bbm();
    spec.params.t_list = {1.0, 3.0, 5.0};
    spec.params.replicas = 800;
    const auto rep = mc::run_experiment(spec, 0);
    CHECK(rep.pass);
}

TEST_CASE("report serialization round trips structurally") {
    mc::ExperimentSpec spec;
    spec.experiment_id = "mean_one";
    spec.model = binary_bbm();
    spec.params.thetas = {0.5};
    spec.params.t = 1.0;
    spec.params.replicas = 300;
    const auto rep = mc::run_experiment(spec, 1);

    const std::string json = mc::report_to_json(rep);
    CHECK(json.find("\"experiment_id\": \"mean_one\"") != std::string::npos);
    CHECK(json.find("config_digest") != std::string::npos);

    const std::string csv = mc::report_to_csv(rep);
    CHECK(csv.rfind("kind,name,value", 0) == 0);
    CHECK(csv.find("mean_one_theta=0.5") != std::string::npos);
}

TEST_CASE("tail calculus of random sums (synthetic oracle, no simulator)") {
    // P(sum_{i<=N} X_i > x) ~ (c1 (EX)^p + c2 EN) x^{-p} with p = 1.5.
    Rng rng(271828);
    const int n = 1000000;

    SUBCASE("heavy count, light summands: c2 = 0") {
        const double s = 2.5, p = s - 1.0;
        const double c1 = 1.0 / (p * std::riemann_zeta(s)); // P(N>x) ~ c1 x^{-p}
        const double ex = 1.0;                              // X ~ Exp(1)
        const double x0 = 50.0;
        int hits = 0;
        for (int i = 0; i < n; ++i) {
            const std::uint64_t cnt = rng.zeta(s);
            double z = 0.0;
            for (std::uint64_t j = 0; j < cnt; ++j) {
                z += rng.exponential(1.0);
                if (z > x0) break;
            }
            if (z > x0) ++hits;
        }
        const double expect = c1 * std::pow(ex, p) * std::pow(x0, -p);
        const double got = hits / static_cast<double>(n);
        CHECK(got == doctest::Approx(expect).epsilon(0.20));
    }

    SUBCASE("light count, heavy summands: c1 = 0") {
        const double p = 1.5;
        const double x0 = 200.0; // far enough out for the one-big-jump regime
        const double mean_n = 3.0; // N deterministic
        int hits = 0;
        for (int i = 0; i < n; ++i) {
            double z = 0.0;
            for (int j = 0; j < 3; ++j) z += std::pow(rng.uniform(), -1.0 / p); // Pareto(p)
            if (z > x0) ++hits;
        }
        const double expect = mean_n * std::pow(x0, -p); // c2 = 1 for exact Pareto
        const double got = hits / static_cast<double>(n);
        CHECK(got == doctest::Approx(expect).epsilon(0.20));
    }
}
