#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "vflossy/common.hpp"
#include "vflossy/rng.hpp"

namespace vflossy {

// Inverse of the standard normal CDF, Acklam's rational approximation
// (relative error < 1.2e-9 over (0,1)). Coefficients are the published set;
// they are spelled out so the bound evaluation is reproducible bit-for-bit.
inline double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("inverse_normal_cdf: p must be in (0,1)");
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1.0 - plow;
    double q, r, x;
    if (p < plow) {
        q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= phigh) {
        q = p - 0.5;
        r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // One Halley step against erfc sharpens the tail to ~1e-15.
    double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
    return x - u / (1.0 + x * u / 2.0);
}

// Upper-tail inverse: smallest t with P(Z >= t) = eps.
inline double normal_upper_quantile(double eps) { return -inverse_normal_cdf(eps); }

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

// Wilson score interval for a binomial proportion.
inline Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.959963984540054) {
    if (trials == 0) return {0.0, 1.0};
    double n = static_cast<double>(trials);
    double phat = static_cast<double>(successes) / n;
    double z2 = z * z;
    double denom = 1.0 + z2 / n;
    double center = (phat + z2 / (2.0 * n)) / denom;
    double half = z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

// Percentile bootstrap for a statistic of a sample of doubles.
template <typename Stat>
Interval bootstrap_ci(const std::vector<double>& sample, Stat&& stat, int resamples,
                      std::uint64_t seed, double level = 0.95) {
    if (sample.empty()) return {0.0, 0.0};
    std::vector<double> stats(resamples);
    std::vector<double> scratch(sample.size());
    for (int r = 0; r < resamples; ++r) {
        CounterRng rng(seed, static_cast<std::uint64_t>(r) + 1);
        for (std::size_t i = 0; i < sample.size(); ++i)
            scratch[i] = sample[rng.next_below(sample.size())];
        stats[r] = stat(scratch);
    }
    std::sort(stats.begin(), stats.end());
    double alpha = (1.0 - level) / 2.0;
    auto pick = [&](double q) {
        double idx = q * (resamples - 1);
        auto i = static_cast<std::size_t>(idx);
        return stats[std::min<std::size_t>(i, resamples - 1)];
    };
    return {pick(alpha), pick(1.0 - alpha)};
}

// Ordinary least squares via normal equations; fine for the tiny designs used
// here (<= 4 regressors). Returns coefficients in column order.
inline std::vector<double> ols_fit(const std::vector<std::vector<double>>& X,
                                   const std::vector<double>& y) {
    std::size_t n = X.size();
    if (n == 0 || y.size() != n) throw ConfigError("ols_fit: empty or mismatched data");
    std::size_t k = X[0].size();
    std::vector<double> xtx(k * k, 0.0), xty(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < k; ++a) {
            xty[a] += X[i][a] * y[i];
            for (std::size_t b = 0; b < k; ++b) xtx[a * k + b] += X[i][a] * X[i][b];
        }
    }
    // Gaussian elimination with partial pivoting.
    std::vector<double> aug(k * (k + 1));
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) aug[a * (k + 1) + b] = xtx[a * k + b];
        aug[a * (k + 1) + k] = xty[a];
    }
    for (std::size_t col = 0; col < k; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < k; ++r)
            if (std::fabs(aug[r * (k + 1) + col]) > std::fabs(aug[piv * (k + 1) + col])) piv = r;
        if (std::fabs(aug[piv * (k + 1) + col]) < 1e-13)
            throw SolverError("ols_fit: singular design matrix");
        if (piv != col)
            for (std::size_t b = 0; b <= k; ++b)
                std::swap(aug[piv * (k + 1) + b], aug[col * (k + 1) + b]);
        for (std::size_t r = 0; r < k; ++r) {
            if (r == col) continue;
            double f = aug[r * (k + 1) + col] / aug[col * (k + 1) + col];
            for (std::size_t b = col; b <= k; ++b) aug[r * (k + 1) + b] -= f * aug[col * (k + 1) + b];
        }
    }
    std::vector<double> beta(k);
    for (std::size_t a = 0; a < k; ++a) beta[a] = aug[a * (k + 1) + k] / aug[a * (k + 1) + a];
    return beta;
}

}  // namespace vflossy
