#ifndef BLEV_SIMULATOR_HPP
#define BLEV_SIMULATOR_HPP

// Exact event-driven simulation of the branching particle system. Each
// particle carries an independent Exp(beta) lifetime; motion increments are
// sampled exactly over the sub-intervals cut by snapshot times (increment
// additivity keeps this exact, there is no discretization step). Each
// particle owns an rng substream keyed by (master seed, replica, particle id),
// so realizations are bit-identical under any host parallelism.

#include <cstdint>
#include <optional>
#include <vector>

#include "blev/model.hpp"
#include "blev/rng.hpp"

namespace blev {

struct SimConfig {
    std::vector<double> snapshot_times;      // strictly increasing, >= 0
    std::uint64_t max_particles = 1'000'000; // live-particle cap
    std::uint64_t rng_stream = 0;            // replica identifier
    bool record_lineage = false;
};

void validate(const SimConfig&);

struct Snapshot {
    double time = 0.0;
    std::vector<double> positions; // empty only on extinction
};

struct LineageEntry {
    std::uint64_t id = 0;
    std::uint64_t parent = 0; // == id for the root
    double birth_time = 0.0;
    double death_time = 0.0;
};

struct TreeRealization {
    std::vector<Snapshot> snapshots; // aligned with SimConfig.snapshot_times
    bool extinct = false;
    bool truncated = false;           // live count exceeded max_particles
    double first_branch_time = 0.0;   // death time of the root
    std::vector<LineageEntry> lineage; // filled when record_lineage
};

// Exact-in-distribution increment of the Levy motion over the duration:
// drift*duration + b*sqrt(duration)*G + compound-Poisson jumps.
double sample_motion_increment(const MotionSpec&, double duration, Rng&);

// One draw of the offspring displacement list.
std::vector<double> sample_offspring(const OffspringSpec&, Rng&);

// Run one realization. Deterministic given (model, config, master_seed).
// On explosion the realization is returned with truncated = true and the
// remaining snapshots unfilled; callers must discard it or fail loudly.
TreeRealization simulate(const BranchingModel&, const SimConfig&, std::uint64_t master_seed);

// Append rows "replica,time,position" for every particle of every snapshot.
void append_snapshot_csv(std::string& out, std::uint64_t replica, const TreeRealization&);

} // namespace blev

#endif
