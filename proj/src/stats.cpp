#include "blev/stats.hpp"

#include <algorithm>
#include <cmath>

#include "blev/errors.hpp"

namespace blev {
namespace stats {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / 1.4142135623730950488); }

namespace {

// P(sup |B_bridge| > x), Kolmogorov's series, 100 terms.
double kolmogorov_tail(double x) {
    if (x < 1e-8) return 1.0;
    double sum = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * x * x);
        sum += (j % 2 == 1) ? term : -term;
        if (term < 1e-300) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

} // namespace

KsResult ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
    const std::size_t n = samples.size();
    if (n < 50) throw DegenerateInput("ks_statistic: need at least 50 samples");
    std::sort(samples.begin(), samples.end());
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = cdf(samples[i]);
        d = std::max(d, std::max(f - static_cast<double>(i) / n,
                                 static_cast<double>(i + 1) / n - f));
    }
    return {d, kolmogorov_tail(std::sqrt(static_cast<double>(n)) * d)};
}

double hill_estimator(std::vector<double> samples, std::size_t k) {
    const std::size_t n = samples.size();
    if (k == 0 || k >= n) throw DegenerateInput("hill_estimator: need 0 < k < n");
    for (double x : samples)
        if (!(x > 0.0)) throw DegenerateInput("hill_estimator: samples must be positive");
    std::sort(samples.begin(), samples.end(), std::greater<double>());
    const double x_k = samples[k]; // (k+1)-th largest, the threshold
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += std::log(samples[i] / x_k);
    if (sum < 1e-12 * k)
        throw DegenerateInput("hill_estimator: top-k order statistics are tied");
    return static_cast<double>(k) / sum;
}

double loglog_tail_slope(std::vector<double> samples, std::size_t k) {
    const std::size_t n = samples.size();
    if (k < 2 || k >= n) throw DegenerateInput("loglog_tail_slope: need 2 <= k < n");
    std::sort(samples.begin(), samples.end(), std::greater<double>());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        if (!(samples[j] > 0.0))
            throw DegenerateInput("loglog_tail_slope: samples must be positive");
        const double lx = std::log(samples[j]);
        const double ly = std::log(static_cast<double>(j + 1) / n); // CCDF at x_(j)
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double denom = k * sxx - sx * sx;
    if (std::abs(denom) < 1e-12)
        throw DegenerateInput("loglog_tail_slope: degenerate abscissae");
    return (k * sxy - sx * sy) / denom;
}

std::vector<std::complex<double>> empirical_cf(const std::vector<double>& samples,
                                               const std::vector<double>& lambda_grid) {
    std::vector<std::complex<double>> out;
    out.reserve(lambda_grid.size());
    for (double lam : lambda_grid) {
        double re = 0.0, im = 0.0;
        for (double x : samples) {
            re += std::cos(lam * x);
            im += std::sin(lam * x);
        }
        const double n = static_cast<double>(samples.size());
        out.emplace_back(re / n, im / n);
    }
    return out;
}

std::complex<double> stable_cf_reference(double p, double lambda) {
    const double t = std::pow(lambda, p);
    const double half_pi_p = 1.5707963267948966192 * p;
    return std::exp(std::cos(half_pi_p) * t) *
           std::complex<double>(std::cos(std::sin(half_pi_p) * t),
                                std::sin(std::sin(half_pi_p) * t));
}

double taylor_tail_T(int n, double x) {
    if (n < 0 || !(x >= 0.0)) throw DomainError("taylor_tail_T: need n >= 0, x >= 0");
    if (x <= 1.0) {
        // tail of the alternating exponential series, first term x^{n+1}/(n+1)!;
        // terms decrease strictly, so truncation error < last added term
        double term = 1.0;
        for (int k = 1; k <= n + 1; ++k) term *= x / k;
        double sum = 0.0;
        double sign = 1.0;
        int j = n + 1;
        while (term > 0.0) {
            sum += sign * term;
            if (term <= 1e-18 * sum) break;
            ++j;
            term *= x / j;
            sign = -sign;
        }
        return std::max(sum, 0.0);
    }
    double partial = 0.0;
    double term = 1.0;
    for (int k = 0; k <= n; ++k) {
        partial += term;
        term *= -x / (k + 1);
    }
    const double sign = (n % 2 == 0) ? -1.0 : 1.0;
    return std::max(sign * (std::exp(-x) - partial), 0.0);
}

double mean(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double sample_variance(const std::vector<double>& xs) {
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

double stderr_of_mean(const std::vector<double>& xs) {
    return std::sqrt(sample_variance(xs) / static_cast<double>(xs.size()));
}

double stderr_of_variance(const std::vector<double>& xs) {
    const double m = mean(xs);
    const double n = static_cast<double>(xs.size());
    double m2 = 0.0, m4 = 0.0;
    for (double x : xs) {
        const double d2 = (x - m) * (x - m);
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    return std::sqrt(std::max(m4 - m2 * m2, 0.0) / n);
}

double median(std::vector<double> xs) {
    if (xs.empty()) throw DegenerateInput("median: empty sample");
    const std::size_t mid = xs.size() / 2;
    std::nth_element(xs.begin(), xs.begin() + mid, xs.end());
    double hi = xs[mid];
    if (xs.size() % 2 == 1) return hi;
    std::nth_element(xs.begin(), xs.begin() + mid - 1, xs.begin() + mid);
    return 0.5 * (xs[mid - 1] + hi);
}

} // namespace stats
} // namespace blev
