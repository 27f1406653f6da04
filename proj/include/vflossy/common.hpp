#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace vflossy {

// Errors are split by how the CLI maps them to exit codes:
//   ConfigError -> 1, SolverError -> 2, IntegrityError / IoError -> 3.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IntegrityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr double kLog2E = 1.4426950408889634074;  // log2(e)

// x*log2(x) with the 0*log(0)=0 convention.
inline double xlog2x(double x) {
    return x > 0.0 ? x * std::log2(x) : 0.0;
}

inline double binary_entropy(double p) {
    return -xlog2x(p) - xlog2x(1.0 - p);
}

struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

// Best rational approximation with bounded denominator (continued fractions).
// Used to put distortion values on an exact integer grid.
inline Rational to_rational(double x, std::int64_t max_den, double tol = 1e-12) {
    if (!std::isfinite(x)) throw ConfigError("to_rational: non-finite input");
    bool neg = x < 0.0;
    double v = std::fabs(x);
    std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    double frac = v;
    for (int it = 0; it < 64; ++it) {
        double fl = std::floor(frac);
        if (fl > static_cast<double>(std::numeric_limits<std::int64_t>::max() / 4)) break;
        auto a = static_cast<std::int64_t>(fl);
        std::int64_t p2 = a * p1 + p0;
        std::int64_t q2 = a * q1 + q0;
        if (q2 > max_den) break;
        p0 = p1; q0 = q1; p1 = p2; q1 = q2;
        double rem = frac - fl;
        if (rem < 1e-15) break;
        frac = 1.0 / rem;
    }
    Rational r{neg ? -p1 : p1, q1};
    if (q1 == 0 || std::fabs(r.value() - x) > tol * std::max(1.0, std::fabs(x)))
        throw ConfigError("value " + std::to_string(x) +
                          " is not representable on a rational grid with denominator <= " +
                          std::to_string(max_den));
    std::int64_t g = std::gcd(std::llabs(r.num), r.den);
    if (g > 1) { r.num /= g; r.den /= g; }
    return r;
}

inline std::int64_t lcm_checked(std::int64_t a, std::int64_t b, std::int64_t cap) {
    std::int64_t g = std::gcd(a, b);
    std::int64_t l = a / g;
    if (l > cap / b) return -1;
    return l * b;
}

}  // namespace vflossy
