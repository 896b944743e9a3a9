#ifndef BLEV_MODEL_HPP
#define BLEV_MODEL_HPP

// Domain types for the (xi, beta, P) branching system: a Levy motion
// (finite activity), a branching rate and an offspring point process.

#include <string>
#include <variant>
#include <vector>

#include "blev/errors.hpp"

namespace blev {

// ---- jump-size law of the compound-Poisson part of the motion ----

struct JumpNone {};

struct JumpGaussian {
    double mean = 0.0;
    double sd = 1.0;
};

struct TwoSidedExponential {
    double prob_plus = 0.5; // weight of the positive branch
    double rate_plus = 1.0;
    double rate_minus = 1.0;
};

struct PointMassEntry {
    double location = 0.0;
    double weight = 1.0;
};

struct JumpPointMasses {
    std::vector<PointMassEntry> points;
};

using JumpLaw = std::variant<JumpNone, JumpGaussian, TwoSidedExponential, JumpPointMasses>;

struct MotionSpec {
    double drift = 0.0;     // full linear coefficient of the sampled path
    double diffusion = 0.0; // b >= 0
    double jump_rate = 0.0; // compound-Poisson intensity
    JumpLaw jump_law = JumpNone{};
};

// ---- offspring count law, always supported on k >= 1 here ----

struct CountDeterministic {
    std::uint64_t k = 2;
};

struct CountGeometric {
    double p = 0.5; // success probability, support {1,2,...}, mean 1/p
};

struct CountPoissonPlusOne {
    double lambda = 1.0; // N = 1 + Poisson(lambda)
};

struct CountZeta {
    double s = 2.5; // pmf proportional to k^{-s}, s > 2 so that E N < infinity
};

using CountLaw = std::variant<CountDeterministic, CountGeometric, CountPoissonPlusOne, CountZeta>;

// ---- iid displacement law ----

struct DispPointMass {
    double value = 0.0;
};

struct DispGaussian {
    double mean = 0.0;
    double sd = 1.0;
};

using DisplacementLaw = std::variant<DispPointMass, DispGaussian, TwoSidedExponential>;

// ---- offspring point process ----

struct OffspringLocal {
    CountLaw count; // P = N * delta_0
};

struct OffspringIidDisplaced {
    CountLaw count;
    DisplacementLaw displacement; // S_i iid, independent of N
};

struct OffspringFixed {
    std::vector<double> points; // deterministic configuration
};

using OffspringSpec = std::variant<OffspringLocal, OffspringIidDisplaced, OffspringFixed>;

struct BranchingModel {
    double beta = 1.0;
    MotionSpec motion;
    OffspringSpec offspring;
};

// ---- invariant checks; throw ModelError with the violated clause ----

void validate(const JumpLaw&);
void validate(const CountLaw&);
void validate(const DisplacementLaw&);
void validate(const MotionSpec&);
void validate(const OffspringSpec&);
void validate(const BranchingModel&);

// Mean offspring number m = E N; > 1 for every valid model.
double offspring_mean(const BranchingModel&);

// True when no law in the model concentrates all mass on a lattice; the
// acceptance-relevant sufficient clause is a diffusion component or a
// continuous jump/displacement law.
bool is_nonlattice(const BranchingModel&);

// Canonical catalog models used across tests and docs.
BranchingModel binary_bbm(double beta = 1.0);                 // N == 2, standard BM
BranchingModel drift_only_local(double drift, double beta, const CountLaw& count);
BranchingModel local_zeta_bbm(double s = 2.5, double beta = 1.0); // Zeta counts, BM motion

} // namespace blev

#endif
