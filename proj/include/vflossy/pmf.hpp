#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vflossy/common.hpp"

namespace vflossy {

// Probability mass function on a finite alphabet {0, ..., size-1}.
class Pmf {
  public:
    Pmf() = default;
    explicit Pmf(std::vector<double> probs) : p_(std::move(probs)) { validate(); }

    static Pmf uniform(std::size_t k) {
        return Pmf(std::vector<double>(k, 1.0 / static_cast<double>(k)));
    }

    std::size_t size() const { return p_.size(); }
    double operator[](std::size_t i) const { return p_[i]; }
    const std::vector<double>& probs() const { return p_; }

    double entropy() const {
        double h = 0.0;
        for (double v : p_) h -= xlog2x(v);
        return h;
    }

    double l1_distance(const Pmf& other) const {
        double s = 0.0;
        for (std::size_t i = 0; i < p_.size(); ++i) s += std::fabs(p_[i] - other.p_[i]);
        return s;
    }

    double l2_distance(const Pmf& other) const {
        double s = 0.0;
        for (std::size_t i = 0; i < p_.size(); ++i) {
            double d = p_[i] - other.p_[i];
            s += d * d;
        }
        return std::sqrt(s);
    }

    void validate() const {
        if (p_.size() < 1) throw ConfigError("pmf: empty");
        double sum = 0.0;
        for (std::size_t i = 0; i < p_.size(); ++i) {
            if (!(p_[i] >= 0.0) || !std::isfinite(p_[i]))
                throw ConfigError("pmf: entry " + std::to_string(i) + " is negative or non-finite");
            sum += p_[i];
        }
        if (std::fabs(sum - 1.0) > 1e-12)
            throw ConfigError("pmf: entries sum to " + std::to_string(sum) + ", expected 1");
    }

  private:
    std::vector<double> p_;
};

// Single-letter distortion matrix d(x,y) plus the fidelity level D.
//
// All entries and D are also kept on an exact integer grid (common denominator
// `grid_den`), which is what the D-ball DP, the covering checks, and the codec
// use for tolerance-free comparisons.
class DistortionSpec {
  public:
    DistortionSpec() = default;

    DistortionSpec(std::size_t nx, std::size_t ny, std::vector<double> matrix, double level,
                   std::int64_t max_den = 1000000)
        : nx_(nx), ny_(ny), d_(std::move(matrix)), level_(level) {
        if (nx_ < 1 || ny_ < 1 || d_.size() != nx_ * ny_)
            throw ConfigError("distortion: matrix shape mismatch");
        for (std::size_t i = 0; i < d_.size(); ++i) {
            if (!std::isfinite(d_[i]) || d_[i] < 0.0)
                throw ConfigError("distortion: entry (" + std::to_string(i / ny_) + "," +
                                  std::to_string(i % ny_) + ") must be finite and >= 0");
        }
        if (!(level_ >= 0.0) || !std::isfinite(level_))
            throw ConfigError("distortion: level D must be finite and >= 0");
        build_grid(max_den);
    }

    static DistortionSpec hamming(std::size_t k, double level) {
        std::vector<double> m(k * k, 1.0);
        for (std::size_t i = 0; i < k; ++i) m[i * k + i] = 0.0;
        return DistortionSpec(k, k, std::move(m), level);
    }

    std::size_t source_size() const { return nx_; }
    std::size_t repro_size() const { return ny_; }
    double level() const { return level_; }
    double operator()(std::size_t x, std::size_t y) const { return d_[x * ny_ + y]; }

    double max_entry() const {
        double m = 0.0;
        for (double v : d_) m = std::max(m, v);
        return m;
    }

    double min_in_row(std::size_t x) const {
        double m = d_[x * ny_];
        for (std::size_t y = 1; y < ny_; ++y) m = std::min(m, d_[x * ny_ + y]);
        return m;
    }

    // Smallest achievable expected distortion for source Q.
    double min_expected(const Pmf& q) const {
        double s = 0.0;
        for (std::size_t x = 0; x < nx_; ++x) s += q[x] * min_in_row(x);
        return s;
    }

    // Expected distortion of the best single reproduction letter under Q;
    // rate is zero at or above this level.
    double zero_rate_level(const Pmf& q) const {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t y = 0; y < ny_; ++y) {
            double s = 0.0;
            for (std::size_t x = 0; x < nx_; ++x) s += q[x] * d_[x * ny_ + y];
            best = std::min(best, s);
        }
        return best;
    }

    std::size_t best_single_letter(const Pmf& q) const {
        std::size_t arg = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t y = 0; y < ny_; ++y) {
            double s = 0.0;
            for (std::size_t x = 0; x < nx_; ++x) s += q[x] * d_[x * ny_ + y];
            if (s < best) { best = s; arg = y; }
        }
        return arg;
    }

    // --- exact grid view ---
    std::int64_t grid_den() const { return grid_den_; }
    std::int64_t grid(std::size_t x, std::size_t y) const { return d_int_[x * ny_ + y]; }
    Rational level_rational() const { return level_rat_; }

    // Largest integer distortion budget for blocklength n:
    // max { B : B/grid_den <= n*D }.
    std::int64_t budget(std::size_t n) const {
        // floor(n * Dnum * grid_den / Dden) in exact integer arithmetic.
        __int128 t = static_cast<__int128>(n) * level_rat_.num * grid_den_;
        return static_cast<std::int64_t>(t / level_rat_.den);
    }

    // Exact check: sum of grid distortions `total` obeys total/grid_den <= n*D.
    bool within_budget(std::int64_t total, std::size_t n) const {
        __int128 lhs = static_cast<__int128>(total) * level_rat_.den;
        __int128 rhs = static_cast<__int128>(n) * level_rat_.num * grid_den_;
        return lhs <= rhs;
    }

    // True when the matrix is a scaled Hamming matrix on a shared alphabet.
    bool is_scaled_hamming() const { return scaled_hamming_; }

  private:
    void build_grid(std::int64_t max_den) {
        std::int64_t den = 1;
        for (std::size_t i = 0; i < d_.size(); ++i) {
            Rational r;
            try {
                r = to_rational(d_[i], max_den);
            } catch (const ConfigError&) {
                throw ConfigError("distortion: entry (" + std::to_string(i / ny_) + "," +
                                  std::to_string(i % ny_) + ") = " + std::to_string(d_[i]) +
                                  " is not representable on a rational grid with denominator <= " +
                                  std::to_string(max_den));
            }
            std::int64_t l = lcm_checked(den, r.den, max_den);
            if (l < 0)
                throw ConfigError("distortion: entry (" + std::to_string(i / ny_) + "," +
                                  std::to_string(i % ny_) +
                                  ") does not fit a common grid with denominator <= " +
                                  std::to_string(max_den));
            den = l;
        }
        grid_den_ = den;
        d_int_.resize(d_.size());
        for (std::size_t i = 0; i < d_.size(); ++i)
            d_int_[i] = static_cast<std::int64_t>(std::llround(d_[i] * static_cast<double>(den)));
        level_rat_ = to_rational(level_, max_den);

        scaled_hamming_ = (nx_ == ny_);
        if (scaled_hamming_) {
            std::int64_t off = -1;
            for (std::size_t x = 0; x < nx_ && scaled_hamming_; ++x) {
                for (std::size_t y = 0; y < ny_; ++y) {
                    std::int64_t v = d_int_[x * ny_ + y];
                    if (x == y) {
                        if (v != 0) { scaled_hamming_ = false; break; }
                    } else if (off < 0) {
                        off = v;
                        if (off <= 0) { scaled_hamming_ = false; break; }
                    } else if (v != off) {
                        scaled_hamming_ = false;
                        break;
                    }
                }
            }
        }
    }

    std::size_t nx_ = 0, ny_ = 0;
    std::vector<double> d_;
    double level_ = 0.0;
    std::vector<std::int64_t> d_int_;
    std::int64_t grid_den_ = 1;
    Rational level_rat_{0, 1};
    bool scaled_hamming_ = false;
};

}  // namespace vflossy
