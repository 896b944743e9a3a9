// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Statistical criteria run the corresponding experiment with its
// pinned defaults and the fixed default seed.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <thread>
#include <string>
#include <vector>

#include "blev/experiments.hpp"
#include "blev/martingales.hpp"
#include "blev/rng.hpp"
#include "blev/simulator.hpp"
#include "blev/spectral.hpp"
#include "blev/stats.hpp"

using namespace blev;
namespace sp = blev::spectral;
namespace mg = blev::martingales;
namespace st = blev::stats;

namespace {

constexpr std::uint64_t kSeed = 0x5EED;
int failures = 0;

// Budgets are stated for a commodity 8-core machine; scale on smaller hosts.
double budget_scale() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw >= 8 || hw == 0 ? 1.0 : 8.0 / hw;
}

void run_criterion(int number, const std::string& label, double budget_s,
                   const std::function<std::string()>& body) {
    budget_s *= budget_scale();
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    try {
        detail = body();
    } catch (const std::exception& e) {
        ok = false;
        detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > budget_s) {
        ok = false;
        detail += " [exceeded " + std::to_string(budget_s) + " s budget]";
    }
    if (!detail.empty() && detail.rfind("FAIL", 0) == 0) ok = false;
    std::printf("[%s] criterion %2d: %s (%s) [%.1f s]\n", ok ? "PASS" : "FAIL", number,
                label.c_str(), detail.c_str(), secs);
    if (!ok) ++failures;
}

std::string check(bool ok, const std::string& detail) {
    return (ok ? std::string() : std::string("FAIL: ")) + detail;
}

std::string run_exp(const std::string& id, const BranchingModel& model,
                    mc::ExperimentParams params = {}) {
    mc::ExperimentSpec spec;
    spec.experiment_id = id;
    spec.model = model;
    spec.params = std::move(params);
    spec.seed = kSeed;
    const auto rep = mc::run_experiment(spec);
    std::string summary;
    for (const auto& [name, t] : rep.tests) {
        if (!summary.empty()) summary += "; ";
        summary += name + "=" + std::to_string(t.statistic) + (t.passed ? " ok" : " FAILED");
    }
    return check(rep.pass, summary);
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", x);
    return buf;
}

} // namespace

int main() {
    const BranchingModel bbm = binary_bbm(1.0);
    const BranchingModel zeta = local_zeta_bbm(2.5, 1.0);

    run_criterion(1, "spectral exactness on binary BBM", 1.0, [&] {
        const double k1 = sp::kappa(bbm, 1.0);
        const double ts = *sp::find_theta_star(bbm);
        const double p1 = *sp::find_p_star(bbm, 1.0);
        const double p05 = *sp::find_p_star(bbm, 0.5);
        const bool ok = k1 == 1.5 && std::abs(ts - std::sqrt(2.0)) <= 1e-9 &&
                        std::abs(p1 - 2.0) <= 1e-9 && std::abs(p05 - 8.0) <= 1e-9;
        return check(ok, "kappa(1)=" + fmt(k1) + " theta*=" + fmt(ts) + " p*(1)=" + fmt(p1) +
                             " p*(0.5)=" + fmt(p05));
    });

    run_criterion(2, "mean-one martingale, theta in {0.25,0.5,1}, t=3", 30.0,
                  [&] { return run_exp("mean_one", bbm); });

    run_criterion(3, "exponential growth of the tilted mass, t in {1,2,3}", 30.0,
                  [&] { return run_exp("growth", bbm); });

    run_criterion(4, "variance of W_T vs closed form (T=8 and T=10 agree)", 120.0,
                  [&] { return run_exp("variance", bbm); });

    run_criterion(5, "normal CLT of the fluctuation (KS p > 0.01)", 120.0,
                  [&] { return run_exp("normal_clt", bbm); });

    run_criterion(6, "tail index of W_T on the zeta model (Hill, log-log slope)", 120.0,
                  [&] { return run_exp("tail_index", zeta); });

    run_criterion(7, "stable CLT characteristic-function distance <= 0.1", 180.0,
                  [&] { return run_exp("stable_clt", zeta); });

    run_criterion(8, "maximum centering median near -3/(2 theta*)", 60.0,
                  [&] { return run_exp("max_centering", bbm); });

    run_criterion(9, "boundary rate: sqrt(t) W_t(theta*) level-stable", 60.0,
                  [&] { return run_exp("boundary_rate", bbm); });

    run_criterion(10, "drift-only degenerate identity, exact to 1e-12", 1.0, [&] {
        const BranchingModel drift = drift_only_local(1.3, 1.0, CountPoissonPlusOne{1.5});
        const double rate = drift.beta * (offspring_mean(drift) - 1.0);
        SimConfig cfg;
        cfg.snapshot_times = {3.0};
        double worst = 0.0;
        for (int r = 0; r < 50; ++r) {
            cfg.rng_stream = r;
            const auto tree = simulate(drift, cfg, kSeed);
            const auto& snap = tree.snapshots[0];
            const double scaled = std::exp(-rate * snap.time) *
                                  static_cast<double>(snap.positions.size());
            for (double theta : {0.1, 1.0, 5.0}) {
                const double w = mg::additive_W(snap, drift, theta);
                worst = std::max(worst, std::abs(w - scaled) / std::max(1.0, scaled));
            }
        }
        return check(worst <= 1e-12, "max relative gap " + fmt(worst));
    });

    run_criterion(11, "unit oracles: T_n bound, KS self-test, Hill-on-Pareto, derivatives",
                  30.0, [&] {
        Rng rng(kSeed);

        // Taylor remainder bound on 10^4 random points
        for (int i = 0; i < 10000; ++i) {
            const int n = static_cast<int>(rng.uniform() * 5);
            const double x = rng.uniform() * 50.0;
            double fact = 1.0;
            for (int k = 2; k <= n; ++k) fact *= k;
            const double bound = std::min(2.0 * std::pow(x, n) / fact,
                                          std::pow(x, n + 1) / (fact * (n + 1)));
            const double v = st::taylor_tail_T(n, x);
            if (!(v >= 0.0 && v <= bound * (1.0 + 1e-12) + 1e-300))
                return check(false, "T_n bound violated at n=" + std::to_string(n) +
                                        " x=" + fmt(x));
        }

        // KS self-test rejection rate at alpha = 0.05
        int rejections = 0;
        for (int rep = 0; rep < 200; ++rep) {
            std::vector<double> xs(1000);
            for (auto& x : xs) x = rng.uniform();
            if (st::ks_statistic(xs, [](double u) { return std::clamp(u, 0.0, 1.0); }).p_value <
                0.05)
                ++rejections;
        }
        const double rate = rejections / 200.0;
        if (rate < 0.02 || rate > 0.09)
            return check(false, "KS rejection rate " + fmt(rate));

        // Hill on exact Pareto within +-0.05
        std::vector<double> pareto(100000);
        for (auto& x : pareto) x = std::pow(rng.uniform(), -1.0 / 1.5);
        const double hill =
            st::hill_estimator(pareto, static_cast<std::size_t>(std::pow(1e5, 0.6)));
        if (std::abs(hill - 1.5) > 0.05) return check(false, "Hill " + fmt(hill));

        // derivative consistency against central differences
        const BranchingModel models[] = {bbm, zeta};
        for (const auto& m : models)
            for (int i = 0; i < 10; ++i) {
                const double theta = 0.1 + 1.2 * rng.uniform();
                const double h1 = 1e-5, h2 = 3e-4;
                const double fd1 =
                    (sp::kappa(m, theta + h1) - sp::kappa(m, theta - h1)) / (2.0 * h1);
                const double fd2 = (sp::kappa(m, theta + h2) - 2.0 * sp::kappa(m, theta) +
                                    sp::kappa(m, theta - h2)) /
                                   (h2 * h2);
                if (std::abs(sp::kappa_prime(m, theta) - fd1) >
                        1e-6 * std::max(1.0, std::abs(fd1)) ||
                    std::abs(sp::kappa_double_prime(m, theta) - fd2) >
                        1e-6 * std::max(1.0, std::abs(fd2)))
                    return check(false, "derivative mismatch at theta=" + fmt(theta));
            }

        return check(true, "KS rate " + fmt(rate) + ", Hill " + fmt(hill));
    });

    std::printf("%s: %d of 11 criteria failed\n", failures == 0 ? "PASS" : "FAIL", failures);
    return failures == 0 ? 0 : 1;
}
