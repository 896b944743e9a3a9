#include "blev/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace blev {
namespace spectral {

namespace {

bool finite(double x) { return std::isfinite(x); }

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(9);
    os << x;
    return os.str();
}

// ---- moment generating functions of the small laws, with derivatives ----
// Each returns +inf when the MGF diverges at the argument.

struct Mgf {
    double m0 = kInf; // E e^{aX}
    double m1 = kInf; // E X e^{aX}
    double m2 = kInf; // E X^2 e^{aX}
};

Mgf two_sided_exp_mgf(const TwoSidedExponential& e, double a) {
    const double q = e.prob_plus;
    const bool plus_ok = (q == 0.0) || (a < e.rate_plus);
    const bool minus_ok = (q == 1.0) || (a > -e.rate_minus);
    if (!plus_ok || !minus_ok) return {};
    Mgf r{0.0, 0.0, 0.0};
    if (q > 0.0) {
        const double d = e.rate_plus - a;
        r.m0 += q * e.rate_plus / d;
        r.m1 += q * e.rate_plus / (d * d);
        r.m2 += 2.0 * q * e.rate_plus / (d * d * d);
    }
    if (q < 1.0) {
        const double d = e.rate_minus + a;
        r.m0 += (1.0 - q) * e.rate_minus / d;
        r.m1 -= (1.0 - q) * e.rate_minus / (d * d);
        r.m2 += 2.0 * (1.0 - q) * e.rate_minus / (d * d * d);
    }
    return r;
}

Mgf gaussian_mgf(double mean, double sd, double a) {
    const double m = std::exp(mean * a + 0.5 * sd * sd * a * a);
    const double loc = mean + sd * sd * a;
    return {m, loc * m, (loc * loc + sd * sd) * m};
}

Mgf jump_mgf(const JumpLaw& law, double a) {
    if (std::holds_alternative<JumpNone>(law)) return {1.0, 0.0, 0.0};
    if (const auto* g = std::get_if<JumpGaussian>(&law)) return gaussian_mgf(g->mean, g->sd, a);
    if (const auto* e = std::get_if<TwoSidedExponential>(&law)) return two_sided_exp_mgf(*e, a);
    const auto& pm = std::get<JumpPointMasses>(law);
    Mgf r{0.0, 0.0, 0.0};
    for (const auto& p : pm.points) {
        const double w = p.weight * std::exp(a * p.location);
        r.m0 += w;
        r.m1 += w * p.location;
        r.m2 += w * p.location * p.location;
    }
    return r;
}

Mgf displacement_mgf(const DisplacementLaw& law, double a) {
    if (const auto* p = std::get_if<DispPointMass>(&law)) {
        const double w = std::exp(a * p->value);
        return {w, w * p->value, w * p->value * p->value};
    }
    if (const auto* g = std::get_if<DispGaussian>(&law)) return gaussian_mgf(g->mean, g->sd, a);
    return two_sided_exp_mgf(std::get<TwoSidedExponential>(law), a);
}

// Supremum of the finiteness domain of the MGF in the positive direction.
double jump_abscissa(const JumpLaw& law) {
    if (const auto* e = std::get_if<TwoSidedExponential>(&law))
        return e->prob_plus > 0.0 ? e->rate_plus : kInf;
    return kInf;
}

double displacement_abscissa(const DisplacementLaw& law) {
    if (const auto* e = std::get_if<TwoSidedExponential>(&law))
        return e->prob_plus > 0.0 ? e->rate_plus : kInf;
    return kInf;
}

bool jump_mgf_finite(const JumpLaw& law, double a) { return finite(jump_mgf(law, a).m0); }

bool disp_mgf_finite(const DisplacementLaw& law, double a) {
    return finite(displacement_mgf(law, a).m0);
}

// ---- offspring tilt chi and its first two theta-derivatives ----

struct Tilt {
    double c0 = kInf; // E sum e^{theta S_i}
    double c1 = kInf; // E sum S_i e^{theta S_i}
    double c2 = kInf; // E sum S_i^2 e^{theta S_i}
};

Tilt offspring_tilt(const BranchingModel& model, double theta) {
    if (const auto* local = std::get_if<OffspringLocal>(&model.offspring)) {
        return {count_mean(local->count), 0.0, 0.0};
    }
    if (const auto* iid = std::get_if<OffspringIidDisplaced>(&model.offspring)) {
        const double m = count_mean(iid->count);
        const Mgf s = displacement_mgf(iid->displacement, theta);
        if (!finite(s.m0)) return {};
        return {m * s.m0, m * s.m1, m * s.m2};
    }
    const auto& fixed = std::get<OffspringFixed>(model.offspring);
    Tilt t{0.0, 0.0, 0.0};
    for (double x : fixed.points) {
        const double w = std::exp(theta * x);
        t.c0 += w;
        t.c1 += w * x;
        t.c2 += w * x * x;
    }
    return t;
}

double chi_abscissa(const BranchingModel& model) {
    if (const auto* iid = std::get_if<OffspringIidDisplaced>(&model.offspring))
        return displacement_abscissa(iid->displacement);
    return kInf;
}

// theta strictly below every MGF abscissa.
bool interior(const BranchingModel& model, double theta) {
    if (!(theta > 0.0)) return false;
    const double lim = std::min(
        model.motion.jump_rate > 0.0 ? jump_abscissa(model.motion.jump_law) : kInf,
        chi_abscissa(model));
    return theta < lim;
}

double phi_prime(const BranchingModel& model, double theta) {
    const auto& mo = model.motion;
    double v = mo.drift + mo.diffusion * mo.diffusion * theta;
    if (mo.jump_rate > 0.0) {
        const Mgf j = jump_mgf(mo.jump_law, theta);
        if (!finite(j.m1)) return kInf;
        v += mo.jump_rate * j.m1;
    }
    return v;
}

double phi_double_prime(const BranchingModel& model, double theta) {
    const auto& mo = model.motion;
    double v = mo.diffusion * mo.diffusion;
    if (mo.jump_rate > 0.0) {
        const Mgf j = jump_mgf(mo.jump_law, theta);
        if (!finite(j.m2)) return kInf;
        v += mo.jump_rate * j.m2;
    }
    return v;
}

// theta*kappa'(theta) - kappa(theta); +inf stands for "past the root"
// (the function is increasing wherever kappa'' > 0).
double boundary_gap(const BranchingModel& model, double theta) {
    const double k = kappa(model, theta);
    if (!finite(k)) return kInf;
    const double k1 = model.beta * offspring_tilt(model, theta).c1 + phi_prime(model, theta);
    if (!finite(k1)) return kInf;
    const double v = theta * k1 - k;
    return std::isnan(v) ? kInf : v;
}

constexpr int kMaxBisectIters = 200;
constexpr double kBisectRelTol = 1e-12;

template <class F>
double bisect(F&& f, double lo, double hi) {
    // f(lo) <= 0 < f(hi)
    for (int i = 0; i < kMaxBisectIters && (hi - lo) > kBisectRelTol * std::max(1.0, hi); ++i) {
        const double mid = 0.5 * (lo + hi);
        if (f(mid) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

// ---- count-law moments ----

double count_mean(const CountLaw& law) {
    if (const auto* d = std::get_if<CountDeterministic>(&law)) return static_cast<double>(d->k);
    if (const auto* g = std::get_if<CountGeometric>(&law)) return 1.0 / g->p;
    if (const auto* p = std::get_if<CountPoissonPlusOne>(&law)) return 1.0 + p->lambda;
    const auto& z = std::get<CountZeta>(law);
    return std::riemann_zeta(z.s - 1.0) / std::riemann_zeta(z.s);
}

double count_second_moment(const CountLaw& law) {
    if (const auto* d = std::get_if<CountDeterministic>(&law))
        return static_cast<double>(d->k) * static_cast<double>(d->k);
    if (const auto* g = std::get_if<CountGeometric>(&law)) return (2.0 - g->p) / (g->p * g->p);
    if (const auto* p = std::get_if<CountPoissonPlusOne>(&law))
        return p->lambda * p->lambda + 3.0 * p->lambda + 1.0;
    const auto& z = std::get<CountZeta>(law);
    if (z.s <= 3.0) return kInf;
    return std::riemann_zeta(z.s - 2.0) / std::riemann_zeta(z.s);
}

bool count_power_moment_finite(const CountLaw& law, double p) {
    if (const auto* z = std::get_if<CountZeta>(&law)) return p < z->s - 1.0;
    return true; // deterministic / geometric / Poisson tails beat every power
}

double disp_mgf(const DisplacementLaw& law, double a) { return displacement_mgf(law, a).m0; }

// ---- spectral functions ----

double phi(const BranchingModel& model, double theta) {
    const auto& mo = model.motion;
    double v = mo.drift * theta + 0.5 * mo.diffusion * mo.diffusion * theta * theta;
    if (mo.jump_rate > 0.0) {
        const double m = jump_mgf(mo.jump_law, theta).m0;
        if (!finite(m)) return kInf;
        v += mo.jump_rate * (m - 1.0);
    }
    return v;
}

double chi(const BranchingModel& model, double theta) { return offspring_tilt(model, theta).c0; }

double kappa(const BranchingModel& model, double theta) {
    const double c = chi(model, theta);
    if (!finite(c)) return kInf;
    const double p = phi(model, theta);
    if (!finite(p)) return kInf;
    return model.beta * (c - 1.0) + p;
}

double kappa_prime(const BranchingModel& model, double theta) {
    if (!interior(model, theta))
        throw DomainError("kappa_prime: theta=" + fmt(theta) +
                          " is not interior to the finiteness domain");
    return model.beta * offspring_tilt(model, theta).c1 + phi_prime(model, theta);
}

double kappa_double_prime(const BranchingModel& model, double theta) {
    if (!interior(model, theta))
        throw DomainError("kappa_double_prime: theta=" + fmt(theta) +
                          " is not interior to the finiteness domain");
    return model.beta * offspring_tilt(model, theta).c2 + phi_double_prime(model, theta);
}

ThetaDomain theta_domain(const BranchingModel& model) {
    const double jump_lim =
        model.motion.jump_rate > 0.0 ? jump_abscissa(model.motion.jump_law) : kInf;
    const double disp_lim = chi_abscissa(model);
    ThetaDomain d;
    d.theta_plus = std::min(jump_lim, disp_lim);
    if (!finite(d.theta_plus)) {
        d.endpoint_in_domain = false;
        d.description = "theta_plus = +inf (Gaussian / point-mass laws only)";
    } else {
        // Only the two-sided exponential family can bind, and its MGF
        // diverges at its own rate, so the endpoint is always open.
        d.endpoint_in_domain = false;
        d.description = "theta_plus = " + fmt(d.theta_plus) + " bound by " +
                        (jump_lim <= disp_lim ? std::string("the jump law")
                                              : std::string("the displacement law")) +
                        "; open (exponential MGF diverges at its rate)";
    }
    if (!finite(kappa(model, std::min(1e-6, d.theta_plus / 2))))
        throw ModelError("theta_domain: kappa is infinite arbitrarily close to 0");
    return d;
}

std::optional<double> find_theta_star(const BranchingModel& model) {
    const ThetaDomain dom = theta_domain(model);
    const double hi_limit =
        finite(dom.theta_plus) ? dom.theta_plus * (1.0 - 1e-12) : 1e3;

    double lo = 1e-3;
    double g_lo = boundary_gap(model, lo);
    if (g_lo >= 0.0) {
        // root below the standard expansion start
        return bisect([&](double t) { return boundary_gap(model, t); }, 1e-12, lo);
    }
    double hi = lo;
    for (;;) {
        double next = hi * 2.0;
        if (next >= hi_limit) {
            if (boundary_gap(model, hi_limit) < 0.0) return std::nullopt;
            lo = hi;
            hi = hi_limit;
            break;
        }
        const double g = boundary_gap(model, next);
        if (g >= 0.0) {
            lo = hi;
            hi = next;
            break;
        }
        hi = next;
    }
    return bisect([&](double t) { return boundary_gap(model, t); }, lo, hi);
}

std::optional<double> find_p_star(const BranchingModel& model, double theta) {
    if (!interior(model, theta) || !finite(kappa(model, theta)))
        throw DomainError("find_p_star: theta=" + fmt(theta) +
                          " is not interior to the finiteness domain");
    if (boundary_gap(model, theta) >= 0.0) return std::nullopt; // at or past theta_*

    const double k_theta = kappa(model, theta);
    auto h = [&](double p) {
        const double k = kappa(model, p * theta);
        if (!finite(k)) return kInf;
        const double v = k - p * k_theta;
        return std::isnan(v) ? kInf : v;
    };

    const ThetaDomain dom = theta_domain(model);
    const double p_cap =
        finite(dom.theta_plus) ? dom.theta_plus * (1.0 - 1e-12) / theta : 1e6;

    double lo = 1.0;
    double hi = 1.0 + 1e-3;
    while (h(hi) < 0.0) {
        lo = hi;
        hi = 1.0 + (hi - 1.0) * 2.0;
        if (hi >= p_cap) {
            if (h(p_cap) < 0.0) return std::nullopt;
            hi = p_cap;
            break;
        }
    }
    return bisect(h, lo, hi);
}

// ---- condition verdicts ----

ConditionId condition_from_string(const std::string& id) {
    if (id == "UI" || id == "LLogL") return ConditionId::UI;
    if (id == "WtLp") return ConditionId::WtLp;
    if (id == "Lp" || id == "Hp") return ConditionId::Lp;
    if (id == "H2") return ConditionId::H2;
    if (id == "FMoment") return ConditionId::FMoment;
    if (id == "LogMoment") return ConditionId::LogMoment;
    if (id == "WHW") return ConditionId::WHW;
    if (id == "DerivMart") return ConditionId::DerivMart;
    if (id == "H3") return ConditionId::H3;
    if (id == "Tail") return ConditionId::Tail;
    throw UnsupportedCondition("unknown condition id: " + id);
}

std::string condition_name(ConditionId id) {
    switch (id) {
        case ConditionId::UI: return "UI";
        case ConditionId::WtLp: return "WtLp";
        case ConditionId::Lp: return "Lp";
        case ConditionId::H2: return "H2";
        case ConditionId::FMoment: return "FMoment";
        case ConditionId::LogMoment: return "LogMoment";
        case ConditionId::WHW: return "WHW";
        case ConditionId::DerivMart: return "DerivMart";
        case ConditionId::H3: return "H3";
        case ConditionId::Tail: return "Tail";
    }
    return "?";
}

namespace {

// E <e_theta, P>^p < inf, p > 1.
bool tilt_power_finite(const BranchingModel& model, double theta, double p) {
    if (const auto* local = std::get_if<OffspringLocal>(&model.offspring))
        return count_power_moment_finite(local->count, p);
    if (const auto* iid = std::get_if<OffspringIidDisplaced>(&model.offspring))
        return count_power_moment_finite(iid->count, p) &&
               disp_mgf_finite(iid->displacement, p * theta);
    return true; // fixed configuration: deterministic
}

// E <e_theta,P> (log_+ <e_theta,P>)^r < inf. Count laws in the catalog all
// satisfy E N (log N)^r < inf, so only an exponential displacement can bind.
bool tilt_log_moment_finite(const BranchingModel& model, double theta, double /*r*/) {
    if (const auto* iid = std::get_if<OffspringIidDisplaced>(&model.offspring))
        return disp_mgf_finite(iid->displacement, theta);
    return true;
}

// (kappa') : E sum |S_i| e^{theta S_i} < inf and integral |y| e^{theta y} n(dy) < inf.
bool kappa_prime_clause(const BranchingModel& model, double theta) {
    if (const auto* iid = std::get_if<OffspringIidDisplaced>(&model.offspring))
        if (!disp_mgf_finite(iid->displacement, theta)) return false;
    if (model.motion.jump_rate > 0.0 && !jump_mgf_finite(model.motion.jump_law, theta))
        return false;
    return true;
}

// E sum f(S_i) < inf for f = |x|^r e^{theta x} (catalog threshold equals the
// MGF threshold; polynomial factors do not move an exponential boundary).
bool tilt_poly_exp_finite(const BranchingModel& model, double theta) {
    if (const auto* iid = std::get_if<OffspringIidDisplaced>(&model.offspring))
        return disp_mgf_finite(iid->displacement, theta);
    return true;
}

struct ClauseList {
    bool holds = true;
    std::string detail;
    void require(bool ok, const std::string& clause) {
        if (ok) return;
        if (!holds) detail += "; ";
        holds = false;
        detail += clause;
    }
};

double need(const std::optional<double>& v, const char* name) {
    if (!v) throw ConfigError(std::string("condition requires parameter ") + name);
    return *v;
}

} // namespace

ConditionVerdict check_condition(const BranchingModel& model, ConditionId id,
                                 const ConditionParams& params) {
    ConditionVerdict verdict;
    verdict.condition_id = condition_name(id);
    ClauseList c;

    auto require_theta_in_domain = [&](double theta) {
        c.require(theta > 0.0 && finite(kappa(model, theta)),
                  "theta=" + fmt(theta) + " not in Theta (kappa infinite)");
    };

    switch (id) {
        case ConditionId::UI: {
            const double theta = need(params.theta, "theta");
            require_theta_in_domain(theta);
            if (c.holds) {
                c.require(kappa_prime_clause(model, theta),
                          "(kappa') moment clause fails at theta=" + fmt(theta));
            }
            if (c.holds) {
                const double gap = boundary_gap(model, theta);
                // strict inequality with a relative deadband: at theta_* the
                // exact gap is 0 and rounding must not flip the verdict
                const double tol = 1e-12 * std::max(1.0, std::abs(kappa(model, theta)));
                c.require(gap < -tol, "(LLogL) clause theta*kappa'(theta) < kappa(theta) "
                                      "violated: theta*kappa'-kappa=" + fmt(gap));
                c.require(tilt_log_moment_finite(model, theta, 1.0),
                          "(LLogL) clause E<e_theta,P>log+<e_theta,P> < inf fails");
            }
            break;
        }
        case ConditionId::WtLp: {
            const double theta = need(params.theta, "theta");
            const double p = need(params.p, "p");
            require_theta_in_domain(theta);
            c.require(finite(phi(model, p * theta)),
                      "clause phi(p*theta) < inf fails at p*theta=" + fmt(p * theta));
            c.require(tilt_power_finite(model, theta, p),
                      "clause E<e_theta,P>^p < inf fails (p=" + fmt(p) + ")");
            break;
        }
        case ConditionId::Lp: {
            const double theta = need(params.theta, "theta");
            const double p = need(params.p, "p");
            require_theta_in_domain(theta);
            if (c.holds) {
                const double k1 = kappa(model, theta);
                const double kp = kappa(model, p * theta);
                c.require(kp < p * k1, "(Hp) clause kappa(p*theta) < p*kappa(theta) fails: "
                                       "kappa(" + fmt(p * theta) + ")=" + fmt(kp) +
                                       " vs p*kappa=" + fmt(p * k1));
            }
            c.require(tilt_power_finite(model, theta, p),
                      "(Hp) clause E<e_theta,P>^p < inf fails (p=" + fmt(p) + ")");
            break;
        }
        case ConditionId::H2: {
            const double theta = need(params.theta, "theta");
            require_theta_in_domain(theta);
            if (c.holds) {
                const double k1 = kappa(model, theta);
                const double k2 = kappa(model, 2.0 * theta);
                c.require(k2 < 2.0 * k1,
                          "(H2) clause kappa(2*theta) < 2*kappa(theta) fails: kappa(" +
                              fmt(2.0 * theta) + ")=" + fmt(k2) + " vs 2*kappa=" + fmt(2.0 * k1));
            }
            c.require(finite(offspring_tilt_sq(model, theta)),
                      "(H2) clause E<e_theta,P>^2 < inf fails");
            break;
        }
        case ConditionId::FMoment: {
            const double theta = need(params.theta, "theta");
            require_theta_in_domain(theta);
            c.require(model.motion.jump_rate == 0.0 ||
                          jump_mgf_finite(model.motion.jump_law, theta),
                      "(condition-f) clause integral_{|y|>1} f(y) n(dy) < inf fails");
            c.require(tilt_poly_exp_finite(model, theta),
                      "(condition-f) clause E sum f(S_i) < inf fails");
            break;
        }
        case ConditionId::LogMoment: {
            const double theta = need(params.theta, "theta");
            const double r = params.r.value_or(1.0);
            require_theta_in_domain(theta);
            c.require(kappa_prime_clause(model, theta),
                      "(kappa') moment clause fails at theta=" + fmt(theta));
            c.require(tilt_poly_exp_finite(model, theta),
                      "(condition 9) clause E sum 1_{S_i>0} S_i^r e^{theta S_i} < inf fails");
            c.require(model.motion.jump_rate == 0.0 ||
                          jump_mgf_finite(model.motion.jump_law, theta),
                      "(condition 9) clause integral_1^inf y^r e^{theta y} n(dy) < inf fails");
            c.require(tilt_log_moment_finite(model, theta, r),
                      "(condition 10) clause E<e_theta,P>(log+<e_theta,P>)^r < inf fails");
            break;
        }
        case ConditionId::WHW: {
            const double theta = need(params.theta, "theta");
            const double p = need(params.p, "p");
            require_theta_in_domain(theta);
            c.require(interior(model, p * theta) && finite(kappa(model, p * theta)),
                      "clause p*theta in interior of Theta fails (p*theta=" + fmt(p * theta) + ")");
            if (c.holds) {
                const double k1 = kappa(model, theta);
                const double kp = kappa(model, p * theta);
                c.require(kp < p * k1, "clause kappa(p*theta) < p*kappa(theta) fails");
            }
            c.require(tilt_power_finite(model, theta, p),
                      "clause E<e_theta,P>^p H(<e_theta,P>) < inf fails (log-power H)");
            break;
        }
        case ConditionId::DerivMart: {
            const auto ts = find_theta_star(model);
            c.require(ts.has_value(), "theta_* does not exist for this model");
            if (ts) {
                // The second clause E V log+ V < inf with
                // V = sum 1_{S_i<=0}(-S_i)e^{theta_* S_i} <= N/(e*theta_*) inherits
                // E N log N < inf, which every catalog count law satisfies.
                c.require(tilt_log_moment_finite(model, *ts, 2.0),
                          "(condition-deriv) clause E<e,P>log+^2<e,P> < inf fails at theta_*");
            }
            break;
        }
        case ConditionId::H3: {
            const auto ts = find_theta_star(model);
            c.require(ts.has_value(), "theta_* does not exist for this model");
            if (ts) {
                c.require(finite(kappa_double_prime(model, *ts)),
                          "(H3) clause kappa''(theta_*) < inf fails");
                c.require(tilt_log_moment_finite(model, *ts, 2.0),
                          "(H3) clause E<e,P>log+^2<e,P> < inf fails at theta_*");
                const double eps = *ts * 1e-3;
                c.require(tilt_log_moment_finite(model, *ts - eps, 1.0),
                          "(H3) clause E<e,P>log+<e,P> < inf fails at theta_*-eps");
            }
            break;
        }
        case ConditionId::Tail: {
            const double theta = need(params.theta, "theta");
            const double p = need(params.p, "p");
            c.require(p > 1.0 && p < 2.0, "clause p in (1,2) fails (p=" + fmt(p) + ")");
            require_theta_in_domain(theta);
            c.require(interior(model, p * theta) && finite(kappa(model, p * theta)),
                      "clause p*theta in interior of Theta fails");
            if (c.holds) {
                const double k1 = kappa(model, theta);
                const double kp = kappa(model, p * theta);
                c.require(kp < p * k1,
                          "clause kappa(p*theta) < p*kappa(theta) fails: kappa(" +
                              fmt(p * theta) + ")=" + fmt(kp) + " vs p*kappa=" + fmt(p * k1));
            }
            c.require(kappa_prime_clause(model, theta),
                      "(kappa') moment clause fails at theta=" + fmt(theta));
            break;
        }
    }

    verdict.holds = c.holds;
    verdict.detail = c.holds ? "all clauses hold" : c.detail;
    return verdict;
}

// ---- moment constants ----

double offspring_tilt_sq(const BranchingModel& model, double theta) {
    if (const auto* local = std::get_if<OffspringLocal>(&model.offspring))
        return count_second_moment(local->count);
    if (const auto* iid = std::get_if<OffspringIidDisplaced>(&model.offspring)) {
        const double m = count_mean(iid->count);
        const double m2 = count_second_moment(iid->count);
        if (!finite(m2)) return kInf;
        const double ms1 = disp_mgf(iid->displacement, theta);
        const double ms2 = disp_mgf(iid->displacement, 2.0 * theta);
        if (!finite(ms1) || !finite(ms2)) return kInf;
        return m * ms2 + (m2 - m) * ms1 * ms1;
    }
    const double c = chi(model, theta);
    return c * c;
}

double sigma_theta_sq(const BranchingModel& model, double theta) {
    const auto verdict = check_condition(model, ConditionId::H2, {theta, {}, {}});
    if (!verdict.holds) throw ConditionError("sigma_theta_sq: " + verdict.detail);
    const double e2 = offspring_tilt_sq(model, theta);
    const double denom = 2.0 * kappa(model, theta) - kappa(model, 2.0 * theta);
    const double v = model.beta * (e2 - chi(model, 2.0 * theta)) / denom - 1.0;
    if (!(v > 0.0))
        throw ConditionError("sigma_theta_sq: computed variance " + fmt(v) +
                             " is not positive (degenerate limit)");
    return v;
}

double tail_prefactor(const BranchingModel& model, double theta, double p) {
    const auto verdict = check_condition(model, ConditionId::Tail, {theta, p, {}});
    if (!verdict.holds) throw ConditionError("tail_prefactor: " + verdict.detail);
    const double k1 = kappa(model, theta);
    const double kp = kappa(model, p * theta);
    return (model.beta + p * k1 - phi(model, p * theta)) / (p * k1 - kp);
}

double c_p_constant(const BranchingModel& model, double theta, double p) {
    const double pre = tail_prefactor(model, theta, p);
    const double gamma_term = -std::tgamma(1.0 - p); // > 0 on p in (1,2)
    return std::pow(gamma_term * pre, 1.0 / p);
}

double moment_Y_theta(const BranchingModel& model, double theta, double r) {
    if (r == 0.0) return 1.0;
    const double k = kappa(model, theta);
    const double ph = phi(model, r * theta);
    if (!finite(k) || !finite(ph)) return kInf;
    const double denom = model.beta + r * k - ph;
    return denom > 0.0 ? model.beta / denom : kInf;
}

double centering_m(const BranchingModel& model, double t) {
    const auto ts = find_theta_star(model);
    if (!ts) throw ConditionError("centering_m: theta_* does not exist for this model");
    if (!(t > 0.0)) throw DomainError("centering_m: t must be > 0");
    const double c_star = kappa(model, *ts) / *ts;
    return c_star * t - 1.5 / *ts * std::log(t);
}

std::optional<PowerTail> xi_tail(const BranchingModel& model, double theta) {
    PowerTail count_tail{kInf, 0.0};
    PowerTail tilt_tail{kInf, 0.0};
    double mean_tilt = 1.0; // E e^{theta S}
    double mean_n = 0.0;

    auto count_part = [&](const CountLaw& law) {
        mean_n = count_mean(law);
        if (const auto* z = std::get_if<CountZeta>(&law)) {
            const double e = z->s - 1.0;
            count_tail = {e, 1.0 / (e * std::riemann_zeta(z->s))};
        }
    };

    if (const auto* local = std::get_if<OffspringLocal>(&model.offspring)) {
        count_part(local->count);
    } else if (const auto* iid = std::get_if<OffspringIidDisplaced>(&model.offspring)) {
        count_part(iid->count);
        mean_tilt = disp_mgf(iid->displacement, theta);
        if (const auto* e = std::get_if<TwoSidedExponential>(&iid->displacement))
            if (e->prob_plus > 0.0) tilt_tail = {e->rate_plus / theta, e->prob_plus};
    } else {
        return std::nullopt; // fixed configuration: deterministic, light tail
    }

    const double p = std::min(count_tail.exponent, tilt_tail.exponent);
    if (!finite(p)) return std::nullopt;
    if (!finite(mean_tilt)) return std::nullopt;

    const double c1 = count_tail.exponent == p ? count_tail.constant : 0.0;
    const double c2 = tilt_tail.exponent == p ? tilt_tail.constant : 0.0;
    const double l_tilt = c1 * std::pow(mean_tilt, p) + c2 * mean_n;

    const double ey_p = moment_Y_theta(model, theta, p);
    if (!finite(ey_p)) return std::nullopt;
    return PowerTail{p, ey_p * l_tilt};
}

SpectralProfile build_profile(const BranchingModel& model,
                              const std::vector<double>& theta_grid) {
    SpectralProfile prof;
    prof.theta_grid = theta_grid;
    const ThetaDomain dom = theta_domain(model);
    prof.theta_plus = dom.theta_plus;
    prof.theta_plus_in_domain = dom.endpoint_in_domain;
    prof.notes = dom.description;
    prof.theta_star = find_theta_star(model);

    prof.kappa.reserve(theta_grid.size());
    for (double th : theta_grid) {
        prof.kappa.push_back(kappa(model, th));
        const bool in = interior(model, th);
        prof.kappa1.push_back(in ? kappa_prime(model, th) : kInf);
        prof.kappa2.push_back(in ? kappa_double_prime(model, th) : kInf);
    }

    // Convexity of kappa on the grid restricted to the finiteness domain.
    double scale = 0.0;
    for (double k : prof.kappa)
        if (finite(k)) scale = std::max(scale, std::abs(k));
    for (std::size_t i = 1; i + 1 < prof.kappa.size(); ++i) {
        const double a = prof.kappa[i - 1], b = prof.kappa[i], c = prof.kappa[i + 1];
        if (!finite(a) || !finite(b) || !finite(c)) continue;
        const double h1 = theta_grid[i] - theta_grid[i - 1];
        const double h2 = theta_grid[i + 1] - theta_grid[i];
        const double second = (c - b) / h2 - (b - a) / h1;
        if (second < -1e-9 * std::max(1.0, scale))
            throw ModelError("build_profile: kappa fails discrete convexity at theta=" +
                             fmt(theta_grid[i]));
    }
    if (prof.theta_star) {
        const double t = *prof.theta_star;
        const double gap = std::abs(t * kappa_prime(model, t) - kappa(model, t));
        if (gap > 1e-8 * std::max(1.0, std::abs(kappa(model, t))))
            throw ModelError("build_profile: theta_* identity violated, residual " + fmt(gap));
    }
    return prof;
}

} // namespace spectral
} // namespace blev
