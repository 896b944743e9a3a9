#ifndef BLEV_SPECTRAL_HPP
#define BLEV_SPECTRAL_HPP

// Closed-form evaluation of the spectral functions
//
//   phi(theta)   = log E exp(theta * xi_1)            (motion cumulant)
//   chi(theta)   = E <e_theta, P>                     (offspring tilt)
//   kappa(theta) = beta * (chi(theta) - 1) + phi(theta)
//
// together with their derivatives, the boundary parameter theta_*, the
// critical exponent p_*, moment/integrability condition verdicts, and the
// constants entering the variance, tail and stable-limit formulas.
//
// Extended-real convention: +infinity propagates through sums, and no
// operation lets a NaN escape.

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "blev/model.hpp"

namespace blev {
namespace spectral {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---- core spectral functions ----

double phi(const BranchingModel&, double theta);
double chi(const BranchingModel&, double theta);
double kappa(const BranchingModel&, double theta);

// First and second derivatives; theta must be interior to the finiteness
// domain, otherwise DomainError.
double kappa_prime(const BranchingModel&, double theta);
double kappa_double_prime(const BranchingModel&, double theta);

// ---- finiteness domain Theta = {theta > 0 : kappa(theta) < inf} ----

struct ThetaDomain {
    double theta_plus = kInf;        // right endpoint
    bool endpoint_in_domain = false; // whether kappa(theta_plus) < inf
    std::string description;         // which law binds and openness
};

ThetaDomain theta_domain(const BranchingModel&);

// ---- boundary parameter and critical exponent ----

// Unique root of theta * kappa'(theta) = kappa(theta) in the interior of
// Theta; absent when the defining function stays negative (e.g. drift-only
// local models) or the root escapes the domain.
std::optional<double> find_theta_star(const BranchingModel&);

// Root in p of kappa(p * theta) = p * kappa(theta) on (1, theta_plus/theta);
// theta must lie in the interior of Theta (DomainError otherwise).
std::optional<double> find_p_star(const BranchingModel&, double theta);

// ---- condition verdicts ----

enum class ConditionId {
    UI,        // theta*kappa'(theta) < kappa(theta) and E<e,P>log+<e,P> < inf
    WtLp,      // phi(p*theta) < inf and E<e,P>^p < inf
    Lp,        // kappa(p*theta) < p*kappa(theta) and E<e,P>^p < inf
    H2,        // kappa(2theta) < 2kappa(theta) and E<e,P>^2 < inf
    FMoment,   // integral |y|^r e^{theta y} n(dy) < inf and E sum f(S_i) < inf
    LogMoment, // E<e,P>(log+<e,P>)^r < inf plus the side moment clauses
    WHW,       // p*theta interior, kappa(p theta) < p kappa(theta), log-power moment
    DerivMart, // E<e,P>log+^2<e,P> < inf and E V log+ V < inf
    H3,        // E<e,P>log+^2 at theta*, E<e,P>log+ at theta*-eps
    Tail,      // p in (1,2), p*theta interior, kappa(p theta) < p kappa(theta)
};

ConditionId condition_from_string(const std::string& id); // UnsupportedCondition on unknown
std::string condition_name(ConditionId);

struct ConditionParams {
    std::optional<double> theta;
    std::optional<double> p;
    std::optional<double> r;
};

struct ConditionVerdict {
    std::string condition_id;
    bool holds = false;
    std::string detail; // cites the failing clause when holds == false
};

ConditionVerdict check_condition(const BranchingModel&, ConditionId, const ConditionParams&);

// ---- moment constants ----

// Var(W_inf(theta)); requires (H2), else ConditionError citing the clause.
double sigma_theta_sq(const BranchingModel&, double theta);

// (beta + p*kappa(theta) - phi(p*theta)) / (p*kappa(theta) - kappa(p*theta)).
// Requires p in (1,2), p*theta interior, kappa(p theta) < p kappa(theta).
double tail_prefactor(const BranchingModel&, double theta, double p);

// (-Gamma(1-p) * tail_prefactor)^{1/p}; same preconditions.
double c_p_constant(const BranchingModel&, double theta, double p);

// E Y_theta^r = beta / (beta + r*kappa(theta) - phi(r*theta));
// +infinity when the denominator is nonpositive or a component diverges.
double moment_Y_theta(const BranchingModel&, double theta, double r);

// m(t) = c_* t - (3/(2 theta_*)) log t; ConditionError when theta_* absent.
double centering_m(const BranchingModel&, double t);

// ---- tail structure of Xi_theta = Y_theta <e_theta, P> ----

struct PowerTail {
    double exponent; // P(X > x) ~ constant * x^{-exponent}; +inf when lighter
    double constant;
};

// Intrinsic polynomial tail of Xi_theta for the catalog model, when one
// exists (nullopt for light-tailed models). Pure-power slowly varying part.
std::optional<PowerTail> xi_tail(const BranchingModel&, double theta);

// ---- helper moments used by the formulas above (catalog closed forms) ----

double count_mean(const CountLaw&);
double count_second_moment(const CountLaw&);          // E N^2, +inf allowed
bool count_power_moment_finite(const CountLaw&, double p);
double disp_mgf(const DisplacementLaw&, double a);    // E e^{aS}, +inf allowed
double offspring_tilt_sq(const BranchingModel&, double theta); // E <e_theta,P>^2

// ---- tabulated profile ----

struct SpectralProfile {
    std::vector<double> theta_grid;
    std::vector<double> kappa;
    std::vector<double> kappa1;
    std::vector<double> kappa2;
    double theta_plus = kInf;
    bool theta_plus_in_domain = false;
    std::optional<double> theta_star;
    std::string notes;
};

SpectralProfile build_profile(const BranchingModel&, const std::vector<double>& theta_grid);

} // namespace spectral
} // namespace blev

#endif
