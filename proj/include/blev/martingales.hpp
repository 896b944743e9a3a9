#ifndef BLEV_MARTINGALES_HPP
#define BLEV_MARTINGALES_HPP

// Pure functionals from snapshots to the martingale / extremal statistics:
// the Biggins martingale W_t(theta), the derivative martingale D_t, the
// rightmost particle M_t, the recentered point cloud, and the normalized
// fluctuation used by the central limit experiments.

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "blev/model.hpp"
#include "blev/simulator.hpp"

namespace blev {
namespace martingales {

struct MartingaleSample {
    double time = 0.0;
    std::vector<std::pair<double, double>> W; // (theta, W_t(theta))
    std::optional<double> W2theta;
    std::optional<double> Wptheta;
    std::optional<double> D;
    std::optional<double> M;
    std::uint64_t mass = 0;
};

// W_t(theta) = e^{-kappa(theta) t} sum_u e^{theta z_u}; 0 on an empty
// snapshot. DomainError when kappa(theta) is infinite.
double additive_W(const Snapshot&, const BranchingModel&, double theta);

// D_t = sum_u (kappa(theta_*) t - theta_* z_u) e^{theta_* z_u - kappa(theta_*) t};
// ConditionError when theta_* does not exist.
double derivative_D(const Snapshot&, const BranchingModel&);

// Same with theta_* already located (avoids the per-call root find).
double derivative_D(const Snapshot&, const BranchingModel&, double theta_star);

// Max position; absent on an empty snapshot.
std::optional<double> maximum_M(const Snapshot&);

// Positions shifted by the centering m(t); ConditionError when theta_*
// absent, DomainError for t <= 0.
std::vector<double> extremal_centered(const Snapshot&, const BranchingModel&);

enum class FluctuationMode { Normal, Stable };

// b(t) * e^{(kappa(theta) - kappa(p theta)/p) t} * (W_t(theta) - W_T(theta)),
// with p = 2 in Normal mode. The T-snapshot proxies W_infinity; both
// snapshots must come from one coupled realization. ConditionError when
// snap_T.time < snap_t.time.
double fluctuation(const Snapshot& snap_t, const Snapshot& snap_T, const BranchingModel&,
                   double theta, FluctuationMode mode, double p, double b_of_t);

} // namespace martingales
} // namespace blev

#endif
