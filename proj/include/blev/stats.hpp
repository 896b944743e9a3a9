#ifndef BLEV_STATS_HPP
#define BLEV_STATS_HPP

// Reusable estimators for the Monte Carlo lab: one-sample KS test, Hill tail
// index, empirical characteristic function, the stable reference CF, and the
// Taylor remainder used by the tail calculus.

#include <complex>
#include <functional>
#include <vector>

namespace blev {
namespace stats {

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

// One-sample Kolmogorov-Smirnov against a continuous cdf; asymptotic p-value
// from the Kolmogorov series truncated at 100 terms. Requires n >= 50.
KsResult ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

// Standard normal cdf.
double normal_cdf(double x);

// Hill estimator of the polynomial tail index from the k largest order
// statistics: k / sum_{i=1..k} log(X_(n-i+1) / X_(n-k)). Samples must be
// positive; DegenerateInput when the top-k log spacings vanish.
double hill_estimator(std::vector<double> samples, std::size_t k);

// Least-squares slope of log(empirical CCDF) on log(x) over the k largest
// order statistics; approximately -p for a polynomial tail.
double loglog_tail_slope(std::vector<double> samples, std::size_t k);

// (1/n) sum_j exp(i lambda X_j) for each lambda in the grid.
std::vector<std::complex<double>> empirical_cf(const std::vector<double>& samples,
                                               const std::vector<double>& lambda_grid);

// E exp(i lambda U_p) = exp(cos(pi p/2) lambda^p + i sin(pi p/2) lambda^p),
// lambda > 0, p in (1,2).
std::complex<double> stable_cf_reference(double p, double lambda);

// Taylor remainder T_n(x) = (-1)^{n+1} (e^{-x} - sum_{k<=n} (-x)^k / k!),
// series branch for small x to avoid cancellation. x >= 0, n >= 0.
double taylor_tail_T(int n, double x);

// ---- small summaries ----

double mean(const std::vector<double>& xs);
double sample_variance(const std::vector<double>& xs);          // unbiased
double stderr_of_mean(const std::vector<double>& xs);
double stderr_of_variance(const std::vector<double>& xs);       // via 4th moment
double median(std::vector<double> xs);

} // namespace stats
} // namespace blev

#endif
