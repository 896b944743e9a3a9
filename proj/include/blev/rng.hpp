#ifndef BLEV_RNG_HPP
#define BLEV_RNG_HPP

// Counter-based splittable random streams.
//
// Every replica owns a stream key derived from (master seed, replica index),
// and every particle within a replica owns a key derived from (replica key,
// particle id). Streams are therefore independent of thread scheduling: the
// draws a particle consumes depend only on its own key and its own event
// history, which is deterministic given (model, config, seed).

#include <cmath>
#include <cstdint>

namespace blev {

// 64-bit finalizer (murmur3); bijective, good avalanche.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 33;
    z *= 0xFF51AFD7ED558CCDull;
    z ^= z >> 33;
    z *= 0xC4CEB9FE1A85EC53ull;
    z ^= z >> 33;
    return z;
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// Domain tags keep replica-level and particle-level derivations disjoint.
constexpr std::uint64_t kDomainReplica = 0xB1E5A11D00000001ull;
constexpr std::uint64_t kDomainParticle = 0xB1E5A11D00000002ull;

constexpr std::uint64_t derive_key(std::uint64_t key, std::uint64_t index,
                                   std::uint64_t domain) {
    return mix64(key ^ mix64(index * kGolden + domain));
}

constexpr std::uint64_t replica_key(std::uint64_t master_seed, std::uint64_t replica) {
    return derive_key(master_seed, replica, kDomainReplica);
}

constexpr std::uint64_t particle_key(std::uint64_t replica_k, std::uint64_t particle_id) {
    return derive_key(replica_k, particle_id, kDomainParticle);
}

namespace detail {

// Ziggurat tables (Marsaglia-Tsang layout: 128 layers for the normal with a
// signed 31-bit abscissa, 256 layers for the exponential with a 32-bit one),
// built once.
struct ZigguratTables {
    double nr = 3.442619855899;      // normal tail start
    double er = 7.69711747013104972; // exponential tail start
    std::uint32_t kn[128];
    double wn[128];
    double fn[128];
    std::uint32_t ke[256];
    double we[256];
    double fe[256];

    ZigguratTables() {
        {
            const double m1 = 2147483648.0; // 2^31
            const double vn = 9.91256303526217e-3;
            double dn = nr, tn = nr;
            const double q = vn / std::exp(-0.5 * dn * dn);
            kn[0] = static_cast<std::uint32_t>((dn / q) * m1);
            kn[1] = 0;
            wn[0] = q / m1;
            wn[127] = dn / m1;
            fn[0] = 1.0;
            fn[127] = std::exp(-0.5 * dn * dn);
            for (int i = 126; i >= 1; --i) {
                dn = std::sqrt(-2.0 * std::log(vn / dn + std::exp(-0.5 * dn * dn)));
                kn[i + 1] = static_cast<std::uint32_t>((dn / tn) * m1);
                tn = dn;
                fn[i] = std::exp(-0.5 * dn * dn);
                wn[i] = dn / m1;
            }
        }
        {
            const double m2 = 4294967296.0; // 2^32
            const double ve = 3.949659822581572e-3;
            double de = er, te = er;
            const double q = ve / std::exp(-de);
            ke[0] = static_cast<std::uint32_t>((de / q) * m2);
            ke[1] = 0;
            we[0] = q / m2;
            we[255] = de / m2;
            fe[0] = 1.0;
            fe[255] = std::exp(-de);
            for (int i = 254; i >= 1; --i) {
                de = -std::log(ve / de + std::exp(-de));
                ke[i + 1] = static_cast<std::uint32_t>((de / te) * m2);
                te = de;
                fe[i] = std::exp(-de);
                we[i] = de / m2;
            }
        }
    }
};

inline const ZigguratTables& ziggurat() {
    static const ZigguratTables tables;
    return tables;
}

} // namespace detail

// SplitMix64 sequence over a derived key. One instance per particle.
class Rng {
  public:
    explicit Rng(std::uint64_t key) : state_(key) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += kGolden);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform on the open interval (0,1); never returns 0 or 1.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal via the ziggurat; one 64-bit draw on the fast path.
    double normal() {
        const auto& z = detail::ziggurat();
        std::int64_t h = static_cast<std::int32_t>(next_u64() >> 32);
        std::uint32_t i = static_cast<std::uint32_t>(h) & 127u;
        for (;;) {
            if ((h < 0 ? -h : h) < static_cast<std::int64_t>(z.kn[i]))
                return static_cast<double>(h) * z.wn[i];
            if (i == 0) {
                // tail beyond nr
                double xx, yy;
                do {
                    xx = -std::log(uniform()) / z.nr;
                    yy = -std::log(uniform());
                } while (yy + yy < xx * xx);
                return h > 0 ? z.nr + xx : -(z.nr + xx);
            }
            const double x = static_cast<double>(h) * z.wn[i];
            if (z.fn[i] + uniform() * (z.fn[i - 1] - z.fn[i]) < std::exp(-0.5 * x * x))
                return x;
            h = static_cast<std::int32_t>(next_u64() >> 32);
            i = static_cast<std::uint32_t>(h) & 127u;
        }
    }

    double exponential(double rate) { return std_exponential() / rate; }

    // Unit-rate exponential via the ziggurat.
    double std_exponential() {
        const auto& z = detail::ziggurat();
        std::uint32_t j = static_cast<std::uint32_t>(next_u64() >> 32);
        std::uint32_t i = j & 255u;
        for (;;) {
            if (j < z.ke[i]) return static_cast<double>(j) * z.we[i];
            if (i == 0) return z.er - std::log(uniform()); // memoryless tail
            const double x = static_cast<double>(j) * z.we[i];
            if (z.fe[i] + uniform() * (z.fe[i - 1] - z.fe[i]) < std::exp(-x)) return x;
            j = static_cast<std::uint32_t>(next_u64() >> 32);
            i = j & 255u;
        }
    }

    // Poisson(mean): inversion by multiplication for small means, PTRS
    // (Hormann) rejection for large ones.
    std::uint64_t poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean < 30.0) {
            const double limit = std::exp(-mean);
            std::uint64_t k = 0;
            double prod = uniform();
            while (prod > limit) {
                ++k;
                prod *= uniform();
            }
            return k;
        }
        return poisson_ptrs(mean);
    }

    // Zipf/zeta on {1,2,...} with pmf proportional to k^{-s}, s > 1.
    // Devroye's rejection sampler.
    std::uint64_t zeta(double s) {
        const double a = s - 1.0;
        const double b = std::pow(2.0, a);
        for (;;) {
            const double u = uniform();
            const double v = uniform();
            double x = std::floor(std::pow(u, -1.0 / a));
            if (!(x >= 1.0) || x > 9.0e18) continue; // astronomically rare
            const double t = std::pow(1.0 + 1.0 / x, a);
            if (v * x * (t - 1.0) / (b - 1.0) <= t / b)
                return static_cast<std::uint64_t>(x);
        }
    }

  private:
    std::uint64_t poisson_ptrs(double mean) {
        const double b = 0.931 + 2.53 * std::sqrt(mean);
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double v_r = 0.9277 - 3.6224 / (b - 2.0);
        const double log_mean = std::log(mean);
        for (;;) {
            const double u = uniform() - 0.5;
            const double v = uniform();
            const double us = 0.5 - std::abs(u);
            const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
            if (us >= 0.07 && v <= v_r) return static_cast<std::uint64_t>(k);
            if (k < 0.0 || (us < 0.013 && v > us)) continue;
            if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
                k * log_mean - mean - std::lgamma(k + 1.0))
                return static_cast<std::uint64_t>(k);
        }
    }

    std::uint64_t state_;
};

} // namespace blev

#endif
