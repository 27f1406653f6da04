#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "vflossy/common.hpp"
#include "vflossy/pmf.hpp"
#include "vflossy/rd.hpp"

namespace vflossy {

struct DballMeasure {
    double exact_log2 = 0.0;   // log2 of the product-measure of the D-ball, exact DP
    double approx_log2 = 0.0;  // -n*R0(Q_emp, Q, D) - (1/2) log2 n
};

// Measure under Q^n of the distortion-D ball around x^n, by dynamic
// programming over (position, integer distortion budget) on the exact grid.
// Runs in linear space (long double) when the smallest possible mass is
// representable, otherwise in log space.
inline DballMeasure dball_log_measure(const std::vector<std::uint8_t>& x, const Pmf& output,
                                      const DistortionSpec& spec) {
    output.validate();
    if (x.empty()) throw ConfigError("dball_log_measure: empty sequence");
    if (output.size() != spec.repro_size()) throw ConfigError("dball_log_measure: alphabet mismatch");
    const std::size_t n = x.size();
    const std::size_t ny = spec.repro_size();
    for (auto s : x)
        if (s >= spec.source_size()) throw ConfigError("dball_log_measure: symbol out of range");

    const std::int64_t budget = spec.budget(n);
    if (budget > (std::int64_t{1} << 28))
        throw ConfigError("dball_log_measure: distortion grid budget too large (" +
                          std::to_string(budget) + " cells)");

    double min_pos_log2 = 0.0;
    for (std::size_t y = 0; y < ny; ++y)
        if (output[y] > 0.0) min_pos_log2 = std::min(min_pos_log2, std::log2(output[y]));
    const bool linear_ok = static_cast<double>(n) * min_pos_log2 > -4000.0;

    DballMeasure out;
    if (linear_ok) {
        std::vector<long double> cur(static_cast<std::size_t>(budget) + 1, 0.0L), nxt;
        cur[0] = 1.0L;
        nxt.assign(cur.size(), 0.0L);
        for (std::size_t i = 0; i < n; ++i) {
            std::fill(nxt.begin(), nxt.end(), 0.0L);
            for (std::int64_t b = 0; b <= budget; ++b) {
                long double v = cur[b];
                if (v == 0.0L) continue;
                for (std::size_t y = 0; y < ny; ++y) {
                    if (output[y] == 0.0) continue;
                    std::int64_t nb = b + spec.grid(x[i], y);
                    if (nb <= budget) nxt[nb] += v * static_cast<long double>(output[y]);
                }
            }
            std::swap(cur, nxt);
        }
        long double total = 0.0L;
        for (long double v : cur) total += v;
        out.exact_log2 = total > 0.0L ? static_cast<double>(std::log2(static_cast<double>(total)))
                                      : -std::numeric_limits<double>::infinity();
        if (total > 0.0L && !(static_cast<double>(total) > 0.0)) {
            // Edge of double range: redo log in long double.
            out.exact_log2 = static_cast<double>(logl(total) * kLog2E);
        }
    } else {
        const double NEG = -std::numeric_limits<double>::infinity();
        std::vector<double> cur(static_cast<std::size_t>(budget) + 1, NEG), nxt;
        cur[0] = 0.0;
        nxt.assign(cur.size(), NEG);
        std::vector<double> logq(ny, NEG);
        for (std::size_t y = 0; y < ny; ++y)
            if (output[y] > 0.0) logq[y] = std::log2(output[y]);
        auto log2add = [](double a, double b) {
            if (a == -std::numeric_limits<double>::infinity()) return b;
            if (b == -std::numeric_limits<double>::infinity()) return a;
            double m = std::max(a, b);
            return m + std::log2(std::exp2(a - m) + std::exp2(b - m));
        };
        for (std::size_t i = 0; i < n; ++i) {
            std::fill(nxt.begin(), nxt.end(), NEG);
            for (std::int64_t b = 0; b <= budget; ++b) {
                double v = cur[b];
                if (v == NEG) continue;
                for (std::size_t y = 0; y < ny; ++y) {
                    if (logq[y] == NEG) continue;
                    std::int64_t nb = b + spec.grid(x[i], y);
                    if (nb <= budget) nxt[nb] = log2add(nxt[nb], v + logq[y]);
                }
            }
            std::swap(cur, nxt);
        }
        double total = NEG;
        for (double v : cur) total = log2add(total, v);
        out.exact_log2 = total;
    }

    // Empirical pmf of x for the asymptotic expression.
    std::vector<double> emp(spec.source_size(), 0.0);
    for (auto s : x) emp[s] += 1.0 / static_cast<double>(n);
    double r0 = operational_rate(Pmf(std::move(emp)), output, spec);
    out.approx_log2 = std::isinf(r0)
                          ? -std::numeric_limits<double>::infinity()
                          : -static_cast<double>(n) * r0 - 0.5 * std::log2(static_cast<double>(n));
    return out;
}

}  // namespace vflossy
