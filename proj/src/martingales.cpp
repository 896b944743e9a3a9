#include "blev/martingales.hpp"

#include <algorithm>
#include <cmath>

#include "blev/errors.hpp"
#include "blev/spectral.hpp"

namespace blev {
namespace martingales {

double additive_W(const Snapshot& snap, const BranchingModel& model, double theta) {
    const double k = spectral::kappa(model, theta);
    if (!std::isfinite(k))
        throw DomainError("additive_W: kappa(theta) infinite at theta=" + std::to_string(theta));
    const double shift = k * snap.time;
    double sum = 0.0;
    for (double z : snap.positions) sum += std::exp(theta * z - shift);
    return sum;
}

double derivative_D(const Snapshot& snap, const BranchingModel& model) {
    const auto ts = spectral::find_theta_star(model);
    if (!ts) throw ConditionError("derivative_D: theta_* does not exist for this model");
    return derivative_D(snap, model, *ts);
}

double derivative_D(const Snapshot& snap, const BranchingModel& model, double theta_star) {
    const double kt = spectral::kappa(model, theta_star) * snap.time;
    double sum = 0.0;
    for (double z : snap.positions)
        sum += (kt - theta_star * z) * std::exp(theta_star * z - kt);
    return sum;
}

std::optional<double> maximum_M(const Snapshot& snap) {
    if (snap.positions.empty()) return std::nullopt;
    return *std::max_element(snap.positions.begin(), snap.positions.end());
}

std::vector<double> extremal_centered(const Snapshot& snap, const BranchingModel& model) {
    const double m = spectral::centering_m(model, snap.time);
    std::vector<double> out(snap.positions.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = snap.positions[i] - m;
    return out;
}

double fluctuation(const Snapshot& snap_t, const Snapshot& snap_T, const BranchingModel& model,
                   double theta, FluctuationMode mode, double p, double b_of_t) {
    if (mode == FluctuationMode::Normal) p = 2.0;
    if (snap_T.time < snap_t.time)
        throw ConditionError("fluctuation: proxy snapshot time must be >= t");
    const double k1 = spectral::kappa(model, theta);
    const double kp = spectral::kappa(model, p * theta);
    if (!std::isfinite(k1) || !std::isfinite(kp))
        throw DomainError("fluctuation: kappa infinite at theta or p*theta");
    const double w_t = additive_W(snap_t, model, theta);
    const double w_T = additive_W(snap_T, model, theta);
    return b_of_t * std::exp((k1 - kp / p) * snap_t.time) * (w_t - w_T);
}

} // namespace martingales
} // namespace blev
