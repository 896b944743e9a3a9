#include "blev/model.hpp"

#include <cmath>

namespace blev {

namespace {

constexpr double kWeightTol = 1e-12;

struct JumpValidator {
    void operator()(const JumpNone&) const {}
    void operator()(const JumpGaussian& g) const {
        if (!(g.sd > 0.0)) throw ModelError("jump_law.gaussian: sd must be > 0");
    }
    void operator()(const TwoSidedExponential& e) const {
        if (!(e.prob_plus >= 0.0 && e.prob_plus <= 1.0))
            throw ModelError("two_sided_exponential: prob_plus must lie in [0,1]");
        if (!(e.rate_plus > 0.0) || !(e.rate_minus > 0.0))
            throw ModelError("two_sided_exponential: rates must be strictly positive");
    }
    void operator()(const JumpPointMasses& pm) const {
        if (pm.points.empty()) throw ModelError("jump_law.point_masses: empty point list");
        double total = 0.0;
        for (const auto& p : pm.points) {
            if (!(p.weight >= 0.0))
                throw ModelError("jump_law.point_masses: weights must be nonnegative");
            if (!std::isfinite(p.location))
                throw ModelError("jump_law.point_masses: locations must be finite");
            total += p.weight;
        }
        if (std::abs(total - 1.0) > kWeightTol)
            throw ModelError("jump_law.point_masses: weights must sum to 1 within 1e-12");
    }
};

struct CountValidator {
    void operator()(const CountDeterministic& d) const {
        if (d.k < 2)
            throw ModelError("count.deterministic: k >= 2 required (E N > 1)");
    }
    void operator()(const CountGeometric& g) const {
        if (!(g.p > 0.0 && g.p < 1.0))
            throw ModelError("count.geometric: success probability must lie in (0,1)");
    }
    void operator()(const CountPoissonPlusOne& p) const {
        if (!(p.lambda > 0.0))
            throw ModelError("count.poisson_plus_one: lambda > 0 required (E N > 1)");
    }
    void operator()(const CountZeta& z) const {
        if (!(z.s > 2.0))
            throw ModelError("count.zeta: s > 2 required (E N < infinity)");
    }
};

struct DispValidator {
    void operator()(const DispPointMass& p) const {
        if (!std::isfinite(p.value)) throw ModelError("displacement.point_mass: value must be finite");
    }
    void operator()(const DispGaussian& g) const {
        if (!(g.sd > 0.0)) throw ModelError("displacement.gaussian: sd must be > 0");
    }
    void operator()(const TwoSidedExponential& e) const { JumpValidator{}(e); }
};

} // namespace

void validate(const JumpLaw& law) { std::visit(JumpValidator{}, law); }
void validate(const CountLaw& law) { std::visit(CountValidator{}, law); }
void validate(const DisplacementLaw& law) { std::visit(DispValidator{}, law); }

void validate(const MotionSpec& motion) {
    if (!std::isfinite(motion.drift)) throw ModelError("motion: drift must be finite");
    if (!(motion.diffusion >= 0.0)) throw ModelError("motion: diffusion must be >= 0");
    if (!(motion.jump_rate >= 0.0)) throw ModelError("motion: jump_rate must be >= 0");
    const bool no_law = std::holds_alternative<JumpNone>(motion.jump_law);
    if ((motion.jump_rate == 0.0) != no_law)
        throw ModelError("motion: jump_rate = 0 iff jump_law = none");
    validate(motion.jump_law);
}

void validate(const OffspringSpec& off) {
    if (const auto* local = std::get_if<OffspringLocal>(&off)) {
        validate(local->count);
    } else if (const auto* iid = std::get_if<OffspringIidDisplaced>(&off)) {
        validate(iid->count);
        validate(iid->displacement);
    } else {
        const auto& fixed = std::get<OffspringFixed>(off);
        if (fixed.points.size() < 2)
            throw ModelError("offspring.fixed_configuration: at least 2 points required "
                             "(supercriticality)");
        for (double x : fixed.points)
            if (!std::isfinite(x))
                throw ModelError("offspring.fixed_configuration: points must be finite");
    }
}

void validate(const BranchingModel& model) {
    if (!(model.beta > 0.0)) throw ModelError("beta must be > 0");
    validate(model.motion);
    validate(model.offspring);
}

namespace {

double count_law_mean(const CountLaw& law) {
    if (const auto* d = std::get_if<CountDeterministic>(&law)) return static_cast<double>(d->k);
    if (const auto* g = std::get_if<CountGeometric>(&law)) return 1.0 / g->p;
    if (const auto* p = std::get_if<CountPoissonPlusOne>(&law)) return 1.0 + p->lambda;
    const auto& z = std::get<CountZeta>(law);
    return std::riemann_zeta(z.s - 1.0) / std::riemann_zeta(z.s);
}

} // namespace

double offspring_mean(const BranchingModel& model) {
    if (const auto* local = std::get_if<OffspringLocal>(&model.offspring))
        return count_law_mean(local->count);
    if (const auto* iid = std::get_if<OffspringIidDisplaced>(&model.offspring))
        return count_law_mean(iid->count);
    return static_cast<double>(std::get<OffspringFixed>(model.offspring).points.size());
}

bool is_nonlattice(const BranchingModel& model) {
    if (model.motion.diffusion > 0.0) return true;
    if (model.motion.jump_rate > 0.0 &&
        !std::holds_alternative<JumpPointMasses>(model.motion.jump_law))
        return true;
    if (const auto* iid = std::get_if<OffspringIidDisplaced>(&model.offspring))
        return !std::holds_alternative<DispPointMass>(iid->displacement);
    return false;
}

BranchingModel binary_bbm(double beta) {
    BranchingModel m;
    m.beta = beta;
    m.motion.drift = 0.0;
    m.motion.diffusion = 1.0;
    m.offspring = OffspringLocal{CountDeterministic{2}};
    return m;
}

BranchingModel drift_only_local(double drift, double beta, const CountLaw& count) {
    BranchingModel m;
    m.beta = beta;
    m.motion.drift = drift;
    m.motion.diffusion = 0.0;
    m.offspring = OffspringLocal{count};
    return m;
}

BranchingModel local_zeta_bbm(double s, double beta) {
    BranchingModel m;
    m.beta = beta;
    m.motion.diffusion = 1.0;
    m.offspring = OffspringLocal{CountZeta{s}};
    return m;
}

} // namespace blev
