#pragma once

// Test-only oracles, implemented independently of the library's solver paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace oracles {

inline double h2(double p) {
    auto term = [](double v) { return v > 0.0 ? -v * std::log2(v) : 0.0; };
    return term(p) + term(1.0 - p);
}

// Binary-Hamming rate-distortion closed form.
inline double binary_hamming_rate(double p, double d) {
    double crit = std::min(p, 1.0 - p);
    if (d >= crit) return 0.0;
    return h2(p) - h2(d);
}

// Variance of -log2 P(X) for a binary source (the varentropy), which equals
// the binary-Hamming dispersion below the critical distortion.
inline double binary_varentropy(double p) {
    double diff = std::log2((1.0 - p) / p);
    return p * (1.0 - p) * diff * diff;
}

// Frobenius norm of the Hessian of p -> h2(p0/(p0+p1)) - h2(D) in the
// unnormalized coordinates (p0, p1), evaluated on the simplex. Derived by
// hand from w = p0/(p0+p1): H = h2''(p) grad w grad w^T + h2'(p) hess w.
inline double binary_hamming_hessian_fnorm(double p) {
    double hpp = -(1.0 / std::log(2.0)) / (p * (1.0 - p));
    double hp = std::log2((1.0 - p) / p);
    double g0 = 1.0 - p, g1 = -p;
    double w00 = -2.0 * (1.0 - p), w01 = 2.0 * p - 1.0, w11 = 2.0 * p;
    double H00 = hpp * g0 * g0 + hp * w00;
    double H01 = hpp * g0 * g1 + hp * w01;
    double H11 = hpp * g1 * g1 + hp * w11;
    return std::sqrt(H00 * H00 + 2.0 * H01 * H01 + H11 * H11);
}

// Brute-force measure of the D-ball: enumerate every reproduction word and
// compare total integer distortion against the exact budget.
inline double brute_dball_measure(const std::vector<std::uint8_t>& x,
                                  const std::vector<double>& q,
                                  const std::vector<std::int64_t>& d_int, std::size_t ny,
                                  std::int64_t budget) {
    std::size_t n = x.size();
    double total = 0.0;
    std::vector<std::uint8_t> y(n, 0);
    for (;;) {
        std::int64_t d = 0;
        double prob = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            d += d_int[x[i] * ny + y[i]];
            prob *= q[y[i]];
        }
        if (d <= budget) total += prob;
        std::size_t i = 0;
        for (; i < n; ++i) {
            if (++y[i] < ny) break;
            y[i] = 0;
        }
        if (i == n) break;
    }
    return total;
}

// Minimum set-cover size by exhaustive search over candidate subsets of
// growing cardinality. `covers(c, m)` decides whether candidate c covers
// member m. Only usable for tiny instances.
inline std::size_t min_cover_size(std::size_t candidates, std::size_t members,
                                  const std::function<bool(std::size_t, std::size_t)>& covers,
                                  std::size_t max_size = 6) {
    for (std::size_t k = 1; k <= max_size; ++k) {
        std::vector<std::size_t> idx(k);
        for (std::size_t i = 0; i < k; ++i) idx[i] = i;
        for (;;) {
            bool all = true;
            for (std::size_t m = 0; m < members && all; ++m) {
                bool hit = false;
                for (auto c : idx)
                    if (covers(c, m)) { hit = true; break; }
                all = hit;
            }
            if (all) return k;
            std::size_t i = k;
            while (i > 0 && idx[i - 1] == candidates - k + i - 1) --i;
            if (i == 0) break;
            ++idx[i - 1];
            for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
        }
    }
    return 0;  // not found within max_size
}

// Primal grid search for the operational lossy rate of a binary source and
// binary output distribution: minimize I(X;U) + D(P_U || Q) over conditional
// distributions on a uniform grid subject to the expected distortion level.
inline double binary_operational_rate_grid(double p, const std::vector<double>& q,
                                           const std::vector<double>& d, double level,
                                           int steps = 2000) {
    auto xlog2 = [](double v) { return v > 0.0 ? v * std::log2(v) : 0.0; };
    double best = std::numeric_limits<double>::infinity();
    for (int ia = 0; ia <= steps; ++ia) {
        double a = static_cast<double>(ia) / steps;  // W(u=0 | x=0)
        for (int ib = 0; ib <= steps; ++ib) {
            double b = static_cast<double>(ib) / steps;  // W(u=0 | x=1)
            double ed = p * (a * d[0] + (1 - a) * d[1]) + (1 - p) * (b * d[2] + (1 - b) * d[3]);
            if (ed > level + 1e-12) continue;
            // sum_x P(x) sum_u W(u|x) log2(W(u|x)/Q(u))
            double v = 0.0;
            v += p * (xlog2(a) + xlog2(1 - a));
            v += (1 - p) * (xlog2(b) + xlog2(1 - b));
            v -= (p * a + (1 - p) * b) * std::log2(q[0]);
            v -= (p * (1 - a) + (1 - p) * (1 - b)) * std::log2(q[1]);
            best = std::min(best, v);
        }
    }
    return best;
}

// Exact binomial upper tail helper for deviation-mass checks.
inline double binary_deviation_mass(double p, std::size_t n, double threshold_l2) {
    double mass = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
        double q = static_cast<double>(k) / n;
        double dist = std::sqrt(2.0) * std::fabs(q - p);
        if (dist <= threshold_l2) continue;
        double lg = std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(k) + 1) -
                    std::lgamma(static_cast<double>(n - k) + 1) +
                    (k > 0 ? k * std::log(p) : 0.0) + (n - k > 0 ? (n - k) * std::log(1 - p) : 0.0);
        mass += std::exp(lg);
    }
    return mass;
}

// Reference values for the standard normal quantile (upper tail).
struct QuantileRef {
    double eps;
    double value;
};
inline const QuantileRef kUpperQuantiles[] = {
    {1e-9, 5.9978070150076865}, {0.025, 1.9599639845400545}, {0.05, 1.6448536269514729},
    {0.1, 1.2815515655446004},  {0.25, 0.6744897501960817},  {0.5, 0.0},
    {0.9, -1.2815515655446004},
};

}  // namespace oracles
