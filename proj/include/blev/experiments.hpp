#ifndef BLEV_EXPERIMENTS_HPP
#define BLEV_EXPERIMENTS_HPP

// Parallel replica runner and the statistical experiments verifying the
// martingale limit theorems at desk scale. Replica execution is
// embarrassingly parallel with per-replica rng substreams and index-addressed
// result storage, so aggregates are bit-identical for any worker count.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <mutex>
#include <thread>
#include <vector>

#include "blev/errors.hpp"
#include "blev/martingales.hpp"
#include "blev/model.hpp"
#include "blev/simulator.hpp"

namespace blev {
namespace mc {

// ---- replica runner ----

template <class R, class Extract>
std::vector<R> run_replicas_extract(const BranchingModel& model, const SimConfig& base,
                                    std::uint64_t replicas, std::uint64_t seed,
                                    unsigned threads, Extract&& extract) {
    if (replicas < 1) throw ConfigError("run_replicas: replicas >= 1 required");
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(
        std::min<std::uint64_t>(threads, replicas));

    std::vector<R> out(replicas);
    std::atomic<std::uint64_t> next{0};
    std::atomic<std::uint64_t> exploded{UINT64_MAX};
    std::atomic<bool> raised{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto work = [&]() {
        for (;;) {
            const std::uint64_t r = next.fetch_add(1, std::memory_order_relaxed);
            if (r >= replicas) break;
            if (exploded.load(std::memory_order_relaxed) != UINT64_MAX) break;
            if (raised.load(std::memory_order_relaxed)) break;
            SimConfig cfg = base;
            cfg.rng_stream = r;
            try {
                const TreeRealization tree = simulate(model, cfg, seed);
                if (tree.truncated) {
                    std::uint64_t cur = exploded.load();
                    while (r < cur && !exploded.compare_exchange_weak(cur, r)) {}
                    break;
                }
                out[r] = extract(r, tree);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!raised.exchange(true)) first_error = std::current_exception();
                break;
            }
        }
    };

    if (threads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }

    if (raised.load()) std::rethrow_exception(first_error);
    const std::uint64_t bad = exploded.load();
    if (bad != UINT64_MAX)
        throw ExplosionError("replica " + std::to_string(bad) +
                                 " exceeded max_particles=" +
                                 std::to_string(base.max_particles),
                             bad);
    return out;
}

// Which functionals to compute per snapshot.
struct MartingaleRequest {
    std::vector<double> thetas;
    std::optional<double> theta2; // W_t(2 theta)
    std::optional<double> ptheta; // W_t(p theta)
    bool with_D = false;
    bool with_M = false;
};

std::vector<std::vector<martingales::MartingaleSample>> run_replicas(
    const BranchingModel&, const SimConfig&, std::uint64_t replicas, std::uint64_t seed,
    const MartingaleRequest&, unsigned threads);

// ---- experiment specification and report ----

struct ExperimentParams {
    std::vector<double> thetas;  // mean_one
    std::optional<double> theta;
    std::optional<double> theta0; // rightmost_decay reference parameter
    std::optional<double> p;
    std::vector<double> t_list;
    std::optional<double> t;
    std::optional<double> T;
    std::uint64_t replicas = 0;  // 0 = experiment default
    std::string b_mode = "unit"; // stable_clt: unit | critical | derivative
    std::vector<double> lambda_grid{0.25, 0.5, 1.0, 2.0};
    std::uint64_t max_particles = 0; // 0 = per-experiment default
};

struct Estimate {
    double value = 0.0;
    double stderr_ = 0.0;
};

struct TestResult {
    double statistic = 0.0;
    std::optional<double> p_value;
    std::string criterion; // human-readable bound, e.g. "|mean-1| <= 0.0366"
    bool passed = false;
};

struct Provenance {
    std::uint64_t seed = 0;
    std::string config_digest;
    std::uint64_t replicas = 0;
    double wall_ms = 0.0;
};

struct ExperimentReport {
    std::string experiment_id;
    std::vector<std::pair<std::string, Estimate>> estimates;
    std::vector<std::pair<std::string, TestResult>> tests;
    bool pass = false;
    Provenance provenance;
};

struct ExperimentSpec {
    std::string experiment_id;
    BranchingModel model;
    ExperimentParams params;
    std::uint64_t seed = 0x5EED;
};

// Known ids: mean_one, growth, variance, normal_clt, critical_clt,
// stable_clt, tail_index, boundary_rate, max_centering, rightmost_decay.
// Throws ConditionError (cited clause) when paper preconditions fail,
// ConfigError for invalid parameters, ExplosionError / InsufficientSamples
// from the sampling layer.
ExperimentReport run_experiment(const ExperimentSpec&, unsigned threads = 0);

std::vector<std::string> experiment_ids();

// Fill unset parameters with the experiment's pinned defaults.
ExperimentSpec with_defaults(ExperimentSpec);

std::string report_to_json(const ExperimentReport&);
std::string report_to_csv(const ExperimentReport&);

} // namespace mc
} // namespace blev

#endif
