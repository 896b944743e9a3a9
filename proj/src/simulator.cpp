#include "blev/simulator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <queue>

#include "blev/errors.hpp"

namespace blev {

void validate(const SimConfig& config) {
    if (config.snapshot_times.empty())
        throw ConfigError("sim config: snapshot_times must be nonempty");
    if (config.snapshot_times.front() < 0.0)
        throw ConfigError("sim config: snapshot times must be >= 0");
    for (std::size_t i = 1; i < config.snapshot_times.size(); ++i)
        if (!(config.snapshot_times[i] > config.snapshot_times[i - 1]))
            throw ConfigError("sim config: snapshot_times must be strictly increasing");
    if (config.max_particles < 1) throw ConfigError("sim config: max_particles >= 1");
}

double sample_motion_increment(const MotionSpec& motion, double duration, Rng& rng) {
    if (duration == 0.0) return 0.0;
    if (!(duration > 0.0)) throw DomainError("sample_motion_increment: duration must be >= 0");
    double dx = motion.drift * duration;
    if (motion.diffusion > 0.0)
        dx += motion.diffusion * std::sqrt(duration) * rng.normal();
    if (motion.jump_rate > 0.0) {
        const std::uint64_t k = rng.poisson(motion.jump_rate * duration);
        for (std::uint64_t j = 0; j < k; ++j) {
            if (const auto* g = std::get_if<JumpGaussian>(&motion.jump_law)) {
                dx += g->mean + g->sd * rng.normal();
            } else if (const auto* e = std::get_if<TwoSidedExponential>(&motion.jump_law)) {
                dx += rng.uniform() < e->prob_plus ? rng.exponential(e->rate_plus)
                                                   : -rng.exponential(e->rate_minus);
            } else {
                const auto& pm = std::get<JumpPointMasses>(motion.jump_law);
                double u = rng.uniform();
                double x = pm.points.back().location;
                for (const auto& p : pm.points) {
                    u -= p.weight;
                    if (u <= 0.0) { x = p.location; break; }
                }
                dx += x;
            }
        }
    }
    return dx;
}

namespace {

std::uint64_t draw_count(const CountLaw& law, Rng& rng) {
    if (const auto* d = std::get_if<CountDeterministic>(&law)) return d->k;
    if (const auto* g = std::get_if<CountGeometric>(&law))
        return 1 + static_cast<std::uint64_t>(std::log(rng.uniform()) / std::log1p(-g->p));
    if (const auto* p = std::get_if<CountPoissonPlusOne>(&law)) return 1 + rng.poisson(p->lambda);
    return rng.zeta(std::get<CountZeta>(law).s);
}

double draw_displacement(const DisplacementLaw& law, Rng& rng) {
    if (const auto* p = std::get_if<DispPointMass>(&law)) return p->value;
    if (const auto* g = std::get_if<DispGaussian>(&law)) return g->mean + g->sd * rng.normal();
    const auto& e = std::get<TwoSidedExponential>(law);
    return rng.uniform() < e.prob_plus ? rng.exponential(e.rate_plus)
                                       : -rng.exponential(e.rate_minus);
}

} // namespace

std::vector<double> sample_offspring(const OffspringSpec& offspring, Rng& rng) {
    if (const auto* local = std::get_if<OffspringLocal>(&offspring)) {
        return std::vector<double>(draw_count(local->count, rng), 0.0);
    }
    if (const auto* iid = std::get_if<OffspringIidDisplaced>(&offspring)) {
        const std::uint64_t n = draw_count(iid->count, rng);
        std::vector<double> out(n);
        for (auto& s : out) s = draw_displacement(iid->displacement, rng);
        return out;
    }
    return std::get<OffspringFixed>(offspring).points;
}

namespace {

struct Particle {
    double position = 0.0;
    double last_time = 0.0;
    double death_time = 0.0;
    Rng rng{0};
    bool alive = false;
};

struct DeathEvent {
    double time;
    std::uint64_t id; // sequential particle id, breaks time ties
    std::uint32_t slot;
    bool operator>(const DeathEvent& o) const {
        return time > o.time || (time == o.time && id > o.id);
    }
};

} // namespace

TreeRealization simulate(const BranchingModel& model, const SimConfig& config,
                         std::uint64_t master_seed) {
    validate(config);
    const std::uint64_t stream = replica_key(master_seed, config.rng_stream);

    // Slots hold live particles only; dead slots are recycled so memory is
    // bounded by the peak live count, not the total birth count.
    std::vector<Particle> slots;
    slots.reserve(64);
    std::vector<std::uint32_t> free_slots;
    std::priority_queue<DeathEvent, std::vector<DeathEvent>, std::greater<DeathEvent>> deaths;

    TreeRealization out;
    out.snapshots.reserve(config.snapshot_times.size());

    std::uint64_t next_id = 0;
    auto spawn = [&](double birth_time, double position, std::uint64_t parent) {
        const std::uint64_t id = next_id++;
        std::uint32_t slot;
        if (free_slots.empty()) {
            slot = static_cast<std::uint32_t>(slots.size());
            slots.emplace_back();
        } else {
            slot = free_slots.back();
            free_slots.pop_back();
        }
        Particle& p = slots[slot];
        p.rng = Rng(particle_key(stream, id));
        p.position = position;
        p.last_time = birth_time;
        p.death_time = birth_time + p.rng.exponential(model.beta);
        p.alive = true;
        deaths.push({p.death_time, id, slot});
        if (config.record_lineage)
            out.lineage.push_back({id, parent, birth_time, p.death_time});
    };

    auto advance = [&](Particle& p, double to) {
        if (to > p.last_time) {
            p.position += sample_motion_increment(model.motion, to - p.last_time, p.rng);
            p.last_time = to;
        }
    };

    spawn(0.0, 0.0, 0);
    out.first_branch_time = slots[0].death_time;
    std::uint64_t live = 1;

    const auto* local = std::get_if<OffspringLocal>(&model.offspring);
    const auto* iid = std::get_if<OffspringIidDisplaced>(&model.offspring);
    const auto* fixed = std::get_if<OffspringFixed>(&model.offspring);

    for (double ts : config.snapshot_times) {
        while (!deaths.empty() && deaths.top().time <= ts) {
            const DeathEvent ev = deaths.top();
            deaths.pop();
            Particle& parent = slots[ev.slot];
            advance(parent, ev.time);
            parent.alive = false;
            --live;
            const double site = parent.position;
            Rng parent_rng = parent.rng; // slot may be recycled mid-spawn
            free_slots.push_back(ev.slot);
            // displacements come from the parent's stream; lifetimes from
            // each child's own stream
            bool exploded = false;
            auto place = [&](double displacement) {
                if (++live > config.max_particles) {
                    exploded = true;
                    return false;
                }
                spawn(ev.time, site + displacement, ev.id);
                return true;
            };
            if (local) {
                const std::uint64_t n = draw_count(local->count, parent_rng);
                for (std::uint64_t c = 0; c < n && place(0.0); ++c) {}
            } else if (iid) {
                const std::uint64_t n = draw_count(iid->count, parent_rng);
                for (std::uint64_t c = 0; c < n; ++c)
                    if (!place(draw_displacement(iid->displacement, parent_rng))) break;
            } else {
                for (double d : fixed->points)
                    if (!place(d)) break;
            }
            if (exploded) {
                out.truncated = true;
                return out;
            }
        }
        Snapshot snap;
        snap.time = ts;
        snap.positions.reserve(live);
        for (auto& p : slots) {
            if (!p.alive) continue;
            advance(p, ts);
            snap.positions.push_back(p.position);
        }
        if (snap.positions.empty()) out.extinct = true;
        out.snapshots.push_back(std::move(snap));
    }
    return out;
}

void append_snapshot_csv(std::string& out, std::uint64_t replica, const TreeRealization& tree) {
    char buf[64];
    for (const auto& snap : tree.snapshots) {
        for (double x : snap.positions) {
            out += std::to_string(replica);
            out += ',';
            auto r = std::to_chars(buf, buf + sizeof(buf), snap.time);
            out.append(buf, r.ptr);
            out += ',';
            r = std::to_chars(buf, buf + sizeof(buf), x);
            out.append(buf, r.ptr);
            out += '\n';
        }
    }
}

} // namespace blev
