#include <doctest.h>

#include <cmath>

#include "blev/martingales.hpp"
#include "blev/rng.hpp"
#include "blev/spectral.hpp"
#include "blev/stats.hpp"

using namespace blev;
namespace sp = blev::spectral;
namespace mg = blev::martingales;

TEST_CASE("additive_W basics") {
    const BranchingModel m = binary_bbm();
    Snapshot origin{0.0, {0.0}};
    CHECK(mg::additive_W(origin, m, 0.7) == doctest::Approx(1.0).epsilon(1e-14));

    Snapshot empty{2.0, {}};
    CHECK(mg::additive_W(empty, m, 0.7) == 0.0);

    BranchingModel tse;
    tse.motion.diffusion = 1.0;
    tse.offspring = OffspringIidDisplaced{CountDeterministic{2}, TwoSidedExponential{0.5, 3.0, 2.0}};
    CHECK_THROWS_AS(mg::additive_W(origin, tse, 3.5), DomainError);
}

TEST_CASE("drift-only local model: W identical across theta, equal to scaled mass") {
    const BranchingModel m = drift_only_local(1.3, 1.0, CountPoissonPlusOne{1.5});
    SimConfig cfg;
    cfg.snapshot_times = {1.0, 3.0};
    const double rate = m.beta * (offspring_mean(m) - 1.0);
    for (int r = 0; r < 30; ++r) {
        cfg.rng_stream = r;
        const auto tree = simulate(m, cfg, 17);
        for (const auto& snap : tree.snapshots) {
            const double scaled = std::exp(-rate * snap.time) * snap.positions.size();
            for (double theta : {0.1, 1.0, 5.0})
                CHECK(mg::additive_W(snap, m, theta) ==
                      doctest::Approx(scaled).epsilon(1e-12));
        }
    }
}

TEST_CASE("additive_W is a mean-one martingale at t=3 (binary BBM)") {
    const BranchingModel m = binary_bbm();
    SimConfig cfg;
    cfg.snapshot_times = {3.0};
    const int n = 5000;
    std::vector<double> w(n);
    for (int r = 0; r < n; ++r) {
        cfg.rng_stream = r;
        w[r] = mg::additive_W(simulate(m, cfg, 5150).snapshots[0], m, 0.5);
    }
    CHECK(std::abs(stats::mean(w) - 1.0) < 3.0 * stats::stderr_of_mean(w));
}

TEST_CASE("derivative_D closed cases") {
    const BranchingModel m = binary_bbm();
    Snapshot origin{0.0, {0.0}};
    CHECK(mg::derivative_D(origin, m) == 0.0);

    const double theta_star = *sp::find_theta_star(m);
    const double kap = sp::kappa(m, theta_star);
    Snapshot single{2.0, {0.9}};
    const double expect = (kap * 2.0 - theta_star * 0.9) * std::exp(theta_star * 0.9 - kap * 2.0);
    CHECK(mg::derivative_D(single, m) == doctest::Approx(expect).epsilon(1e-13));

    // all particles at kappa(theta_*) t / theta_*: every term vanishes
    const double z0 = kap * 2.0 / theta_star;
    Snapshot flat{2.0, {z0, z0, z0}};
    CHECK(mg::derivative_D(flat, m) == 0.0);

    CHECK_THROWS_AS(
        mg::derivative_D(origin, drift_only_local(1.0, 1.0, CountDeterministic{2})),
        ConditionError);
}

TEST_CASE("derivative_D has mean zero at t=2 (MC oracle)") {
    const BranchingModel m = binary_bbm();
    SimConfig cfg;
    cfg.snapshot_times = {2.0};
    const int n = 10000;
    std::vector<double> d(n);
    for (int r = 0; r < n; ++r) {
        cfg.rng_stream = r;
        d[r] = mg::derivative_D(simulate(m, cfg, 63).snapshots[0], m);
    }
    CHECK(std::abs(stats::mean(d)) < 3.0 * stats::stderr_of_mean(d));
}

TEST_CASE("maximum_M") {
    CHECK(*mg::maximum_M({1.0, {1.7}}) == 1.7);
    CHECK(*mg::maximum_M({1.0, {-2.0, 0.3, 0.1}}) == 0.3);
    CHECK_FALSE(mg::maximum_M({1.0, {}}).has_value());
}

TEST_CASE("extremal_centered") {
    const BranchingModel m = binary_bbm();
    const double m1 = sp::centering_m(m, 1.0);
    CHECK(m1 == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

    Snapshot snap{1.0, {m1}};
    const auto centered = mg::extremal_centered(snap, m);
    REQUIRE(centered.size() == 1);
    CHECK(centered[0] == doctest::Approx(0.0).epsilon(1e-12));

    // m(2t) - 2 m(t) = -(3/(2 theta_*)) (log 2t - 2 log t)
    const double theta_star = *sp::find_theta_star(m);
    for (double t : {1.5, 3.0, 7.0}) {
        const double lhs = sp::centering_m(m, 2.0 * t) - 2.0 * sp::centering_m(m, t);
        const double rhs = -1.5 / theta_star * (std::log(2.0 * t) - 2.0 * std::log(t));
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("fluctuation: zero at t=T and exponent value") {
    const BranchingModel m = binary_bbm();
    Snapshot snap{2.0, {0.4, -0.3}};
    CHECK(mg::fluctuation(snap, snap, m, 0.5, mg::FluctuationMode::Normal, 2.0, 1.0) == 0.0);

    // kappa(0.5) - kappa(1)/2 = 1.125 - 0.75 = 0.375
    Snapshot later{5.0, {1.0, 2.0, -1.0}};
    const double w_t = mg::additive_W(snap, m, 0.5);
    const double w_T = mg::additive_W(later, m, 0.5);
    const double expect = std::exp(0.375 * 2.0) * (w_t - w_T);
    CHECK(mg::fluctuation(snap, later, m, 0.5, mg::FluctuationMode::Normal, 2.0, 1.0) ==
          doctest::Approx(expect).epsilon(1e-13));

    CHECK_THROWS_AS(mg::fluctuation(later, snap, m, 0.5, mg::FluctuationMode::Normal, 2.0, 1.0),
                    ConditionError);
}

TEST_CASE("translation scaling: W(shifted) = e^{theta c} W") {
    const BranchingModel m = binary_bbm();
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        Snapshot snap;
        snap.time = 2.0 * rng.uniform();
        const int k = 1 + static_cast<int>(rng.uniform() * 6);
        for (int i = 0; i < k; ++i) snap.positions.push_back(3.0 * rng.normal());
        const double c = 2.0 * rng.normal();
        Snapshot shifted = snap;
        for (double& z : shifted.positions) z += c;
        const double theta = 0.2 + rng.uniform();
        CHECK(mg::additive_W(shifted, m, theta) ==
              doctest::Approx(std::exp(theta * c) * mg::additive_W(snap, m, theta))
                  .epsilon(1e-12));
    }
}

TEST_CASE("tower property via the branching identity") {
    // For a prefix at time s with particles z_i, the time-t martingale value
    // decomposes as sum_i e^{theta z_i - kappa s} W^i_{t-s} over independent
    // subtrees; averaging fresh continuations must recover W_s.
    const BranchingModel m = binary_bbm();
    const double s = 1.0, t = 3.0, theta = 0.5;
    const double kap = sp::kappa(m, theta);

    SimConfig prefix_cfg;
    prefix_cfg.snapshot_times = {s};
    SimConfig cont_cfg;
    cont_cfg.snapshot_times = {t - s};

    int failures = 0;
    for (int prefix = 0; prefix < 20; ++prefix) {
        prefix_cfg.rng_stream = prefix;
        const auto tree = simulate(m, prefix_cfg, 1001);
        const auto& snap = tree.snapshots[0];
        const double w_s = mg::additive_W(snap, m, theta);

        const int continuations = 200;
        std::vector<double> w_t(continuations);
        for (int j = 0; j < continuations; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < snap.positions.size(); ++i) {
                cont_cfg.rng_stream = static_cast<std::uint64_t>(j) * 4096 + i;
                const auto sub = simulate(m, cont_cfg, mix64(2002 + prefix));
                acc += std::exp(theta * snap.positions[i] - kap * s) *
                       mg::additive_W(sub.snapshots[0], m, theta);
            }
            w_t[j] = acc;
        }
        const double gap = std::abs(stats::mean(w_t) - w_s);
        if (gap > 3.0 * stats::stderr_of_mean(w_t)) ++failures;
    }
    // 20 independent 3-sigma checks: allow one excursion
    CHECK(failures <= 1);
}
