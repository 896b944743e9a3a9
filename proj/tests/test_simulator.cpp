#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "blev/rng.hpp"
#include "blev/simulator.hpp"
#include "blev/spectral.hpp"
#include "blev/stats.hpp"

using namespace blev;
namespace sp = blev::spectral;

TEST_CASE("motion increment: exact degenerate cases") {
    Rng rng(1);
    MotionSpec drift_only;
    drift_only.drift = 2.0;
    CHECK(sample_motion_increment(drift_only, 0.0, rng) == 0.0);
    CHECK(sample_motion_increment(drift_only, 1.5, rng) == 3.0);
}

TEST_CASE("motion increment MGF matches phi (MC oracle)") {
    const BranchingModel bbm = binary_bbm();
    Rng rng(2024);
    const int n = 1000000;
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
        acc += std::exp(sample_motion_increment(bbm.motion, 1.0, rng));
    CHECK(acc / n == doctest::Approx(std::exp(0.5)).epsilon(0.01));
}

TEST_CASE("offspring sampling") {
    Rng rng(3);
    OffspringSpec local = OffspringLocal{CountDeterministic{2}};
    CHECK(sample_offspring(local, rng) == std::vector<double>{0.0, 0.0});

    OffspringSpec fixed = OffspringFixed{{-1.0, 1.0}};
    CHECK(sample_offspring(fixed, rng) == std::vector<double>{-1.0, 1.0});

    OffspringSpec iid = OffspringIidDisplaced{CountDeterministic{3}, DispGaussian{0.0, 1.0}};
    double acc = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (double x : sample_offspring(iid, rng)) s += std::exp(x);
        acc += s;
    }
    CHECK(acc / n == doctest::Approx(3.0 * std::exp(0.5)).epsilon(0.01));
}

TEST_CASE("count law samplers match their moments / pmf (oracles)") {
    Rng rng(4);
    const int n = 200000;

    SUBCASE("geometric mean") {
        OffspringSpec off = OffspringLocal{CountGeometric{0.4}};
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += sample_offspring(off, rng).size();
        CHECK(acc / n == doctest::Approx(1.0 / 0.4).epsilon(0.01));
    }

    SUBCASE("poisson plus one mean, small and large intensity") {
        for (double lambda : {1.5, 50.0}) {
            OffspringSpec off = OffspringLocal{CountPoissonPlusOne{lambda}};
            double acc = 0.0;
            for (int i = 0; i < n; ++i) acc += sample_offspring(off, rng).size();
            CHECK(acc / n == doctest::Approx(1.0 + lambda).epsilon(0.01));
        }
    }

    SUBCASE("zeta pmf bins and tail") {
        const double s = 2.5;
        const double z = std::riemann_zeta(s);
        std::map<std::uint64_t, int> histogram;
        int tail_count = 0;
        for (int i = 0; i < n; ++i) {
            const std::uint64_t k = rng.zeta(s);
            ++histogram[k];
            if (k > 50) ++tail_count;
        }
        for (std::uint64_t k = 1; k <= 4; ++k) {
            const double p = std::pow(static_cast<double>(k), -s) / z;
            const double se = std::sqrt(p * (1.0 - p) / n);
            CHECK(std::abs(histogram[k] / static_cast<double>(n) - p) < 4.0 * se);
        }
        // P(N > x) ~ x^{-(s-1)} / ((s-1) zeta(s))
        double p_tail = 0.0;
        for (std::uint64_t k = 51; k <= 500000; ++k) p_tail += std::pow(k, -s) / z;
        const double se = std::sqrt(p_tail * (1.0 - p_tail) / n);
        CHECK(std::abs(tail_count / static_cast<double>(n) - p_tail) < 4.0 * se);
    }
}

TEST_CASE("simulate: snapshot at t=0 and drift-only exactness") {
    const BranchingModel drift = drift_only_local(2.0, 1.0, CountDeterministic{2});
    SimConfig cfg;
    cfg.snapshot_times = {0.0, 1.0, 2.0};
    const auto tree = simulate(drift, cfg, 7);
    REQUIRE(tree.snapshots.size() == 3);
    CHECK(tree.snapshots[0].positions == std::vector<double>{0.0});
    for (double z : tree.snapshots[1].positions) CHECK(z == doctest::Approx(2.0).epsilon(1e-12));
    for (double z : tree.snapshots[2].positions) CHECK(z == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(tree.snapshots[2].positions.size() >= tree.snapshots[1].positions.size());
}

TEST_CASE("simulate: Galton-Watson mass oracle at t=3") {
    const BranchingModel m = binary_bbm();
    SimConfig cfg;
    cfg.snapshot_times = {3.0};
    const int n = 10000;
    std::vector<double> mass(n);
    for (int r = 0; r < n; ++r) {
        cfg.rng_stream = r;
        mass[r] = simulate(m, cfg, 2025).snapshots[0].positions.size();
    }
    const double mean = stats::mean(mass);
    const double se = stats::stderr_of_mean(mass);
    CHECK(std::abs(mean - std::exp(3.0)) < 3.0 * se);
}

TEST_CASE("root lifetime is Exp(beta): KS at 0.01") {
    const double beta = 1.7;
    const BranchingModel m = binary_bbm(beta);
    SimConfig cfg;
    cfg.snapshot_times = {0.1};
    std::vector<double> lifetimes(10000);
    for (int r = 0; r < 10000; ++r) {
        cfg.rng_stream = r;
        lifetimes[r] = simulate(m, cfg, 31).first_branch_time;
    }
    const auto ks = stats::ks_statistic(
        lifetimes, [beta](double x) { return x <= 0.0 ? 0.0 : 1.0 - std::exp(-beta * x); });
    CHECK(ks.p_value > 0.01);
}

TEST_CASE("mass growth e^{beta(m-1)t} within 3 SE at t in {1,2,3}") {
    BranchingModel m;
    m.beta = 0.8;
    m.motion.diffusion = 1.0;
    m.offspring = OffspringLocal{CountGeometric{0.5}}; // m = 2
    SimConfig cfg;
    cfg.snapshot_times = {1.0, 2.0, 3.0};
    const int n = 10000;
    std::vector<std::vector<double>> mass(3, std::vector<double>(n));
    for (int r = 0; r < n; ++r) {
        cfg.rng_stream = r;
        const auto tree = simulate(m, cfg, 11);
        for (int i = 0; i < 3; ++i) mass[i][r] = tree.snapshots[i].positions.size();
    }
    for (int i = 0; i < 3; ++i) {
        const double expect = std::exp(m.beta * (offspring_mean(m) - 1.0) * cfg.snapshot_times[i]);
        CHECK(std::abs(stats::mean(mass[i]) - expect) < 3.0 * stats::stderr_of_mean(mass[i]));
    }
}

TEST_CASE("tilted mass growth e^{kappa(theta) t} within 3 SE") {
    BranchingModel m;
    m.beta = 1.0;
    m.motion.diffusion = 1.0;
    m.offspring = OffspringIidDisplaced{CountGeometric{0.4}, TwoSidedExponential{0.5, 3.0, 2.0}};
    const double theta = 0.5;
    SimConfig cfg;
    cfg.snapshot_times = {1.0, 2.0};
    const int n = 20000;
    std::vector<std::vector<double>> tilted(2, std::vector<double>(n));
    for (int r = 0; r < n; ++r) {
        cfg.rng_stream = r;
        const auto tree = simulate(m, cfg, 12);
        for (int i = 0; i < 2; ++i) {
            double s = 0.0;
            for (double z : tree.snapshots[i].positions) s += std::exp(theta * z);
            tilted[i][r] = s;
        }
    }
    for (int i = 0; i < 2; ++i) {
        const double expect = std::exp(sp::kappa(m, theta) * cfg.snapshot_times[i]);
        CHECK(std::abs(stats::mean(tilted[i]) - expect) < 3.0 * stats::stderr_of_mean(tilted[i]));
    }
}

TEST_CASE("snapshot consistency: ancestry and monotone counts") {
    const BranchingModel m = binary_bbm();
    SimConfig cfg;
    cfg.snapshot_times = {1.0, 2.5};
    cfg.record_lineage = true;
    for (int r = 0; r < 50; ++r) {
        cfg.rng_stream = r;
        const auto tree = simulate(m, cfg, 77);
        CHECK(tree.snapshots[1].positions.size() >= tree.snapshots[0].positions.size());

        const double s = 1.0, t = 2.5;
        auto alive_at = [&](const LineageEntry& e, double u) {
            return e.birth_time <= u && u < e.death_time;
        };
        for (const auto& e : tree.lineage) {
            if (!alive_at(e, t)) continue;
            LineageEntry cur = e;
            while (cur.birth_time > s) cur = tree.lineage[cur.parent];
            CHECK(alive_at(cur, s));
        }
    }
}

TEST_CASE("determinism: identical (model, config, seed) give bit-identical realizations") {
    const BranchingModel m = local_zeta_bbm(2.5);
    SimConfig cfg;
    cfg.snapshot_times = {1.0, 3.0};
    cfg.rng_stream = 5;
    const auto a = simulate(m, cfg, 321);
    const auto b = simulate(m, cfg, 321);
    REQUIRE(a.snapshots.size() == b.snapshots.size());
    for (std::size_t i = 0; i < a.snapshots.size(); ++i)
        CHECK(a.snapshots[i].positions == b.snapshots[i].positions);
}

TEST_CASE("explosion flag on tiny particle cap") {
    const BranchingModel m = binary_bbm();
    SimConfig cfg;
    cfg.snapshot_times = {6.0};
    cfg.max_particles = 4;
    const auto tree = simulate(m, cfg, 1);
    CHECK(tree.truncated);
}

TEST_CASE("config validation") {
    SimConfig cfg;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg.snapshot_times = {2.0, 1.0};
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg.snapshot_times = {-1.0, 1.0};
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg.snapshot_times = {0.0, 1.0};
    CHECK_NOTHROW(validate(cfg));
}
