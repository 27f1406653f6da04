#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include "vflossy/codec.hpp"
#include "vflossy/common.hpp"
#include "vflossy/dictionary.hpp"
#include "vflossy/pmf.hpp"
#include "vflossy/rd.hpp"
#include "vflossy/rng.hpp"
#include "vflossy/stats.hpp"
#include "vflossy/types.hpp"

namespace vflossy {

// Reproducible i.i.d. stream: symbol k of trial `stream` depends only on
// (seed, stream, k).
inline std::vector<std::uint8_t> sample_stream(const Pmf& source, std::size_t n,
                                               std::uint64_t seed, std::uint64_t stream = 0) {
    source.validate();
    std::vector<std::uint8_t> out(n);
    CounterRng rng(seed, stream);
    for (std::size_t i = 0; i < n; ++i) {
        double u = rng.next_double();
        double acc = 0.0;
        std::uint8_t pick = static_cast<std::uint8_t>(source.size() - 1);
        for (std::size_t a = 0; a < source.size(); ++a) {
            acc += source[a];
            if (u < acc) { pick = static_cast<std::uint8_t>(a); break; }
        }
        out[i] = pick;
    }
    return out;
}

struct TrialRecord {
    std::uint64_t seed = 0;
    std::uint32_t length = 0;
    double rate_sample = 0.0;  // index_width / length, bits per symbol
    double distortion = 0.0;
    bool censored = false;  // parse ran past the dictionary's blocklength range
};

struct TrialSet {
    std::vector<TrialRecord> records;
    std::uint64_t censored = 0;
    std::uint32_t index_width = 0;
    std::uint32_t scan_cap = 0;

    std::vector<double> rate_samples() const {
        std::vector<double> r(records.size());
        for (std::size_t i = 0; i < records.size(); ++i) r[i] = records[i].rate_sample;
        return r;
    }
};

// Monte-Carlo one-shot parses. Trials are indexed, each with its own counter
// generator, so the result is independent of the thread schedule. A trial
// whose parse outruns the dictionary's blocklength range is recorded as
// censored with the rate pinned below any achievable sample (its true rate is
// smaller still), which leaves upper quantiles untouched.
inline TrialSet run_parse_trials(const Pmf& source, const Dictionary& d, std::uint64_t trials,
                                 std::uint64_t seed, unsigned jobs = 0) {
    TrialSet set;
    set.records.resize(trials);
    set.index_width = d.index_width;
    set.scan_cap = d.scan_cap;
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min<std::uint64_t>(jobs, std::max<std::uint64_t>(1, trials));

    std::atomic<std::uint64_t> next_trial{0};
    std::atomic<std::uint64_t> censored{0};
    auto worker = [&]() {
        for (;;) {
            std::uint64_t i = next_trial.fetch_add(1);
            if (i >= trials) break;
            TrialRecord rec;
            rec.seed = CounterRng::mix(seed, i);
            CounterRng rng(seed, i + 1);
            std::uint32_t supplied = 0;
            auto gen = [&]() -> std::optional<std::uint8_t> {
                if (supplied > d.scan_cap) return std::nullopt;
                ++supplied;
                double u = rng.next_double();
                double acc = 0.0;
                std::uint8_t pick = static_cast<std::uint8_t>(source.size() - 1);
                for (std::size_t a = 0; a < source.size(); ++a) {
                    acc += source[a];
                    if (u < acc) { pick = static_cast<std::uint8_t>(a); break; }
                }
                return pick;
            };
            try {
                ParseResult r = parse_first(d, gen);
                rec.length = r.length;
                rec.rate_sample = static_cast<double>(d.index_width) / r.length;
                rec.distortion = r.distortion;
            } catch (const IntegrityError&) {
                rec.censored = true;
                rec.length = d.scan_cap + 1;
                rec.rate_sample = static_cast<double>(d.index_width) / (d.scan_cap + 1);
                censored.fetch_add(1);
            } catch (const IoError&) {
                rec.censored = true;
                rec.length = d.scan_cap + 1;
                rec.rate_sample = static_cast<double>(d.index_width) / (d.scan_cap + 1);
                censored.fetch_add(1);
            }
            set.records[i] = rec;
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    set.censored = censored.load();
    return set;
}

struct OverflowEstimate {
    double estimate = 0.0;
    Interval ci;  // Wilson 95%
    std::uint64_t exceedances = 0;
    std::uint64_t trials = 0;
};

// Fraction of trials whose rate sample meets or exceeds R.
inline OverflowEstimate overflow_probability(const std::vector<double>& rate_samples, double r) {
    OverflowEstimate out;
    out.trials = rate_samples.size();
    for (double v : rate_samples)
        if (v >= r) ++out.exceedances;
    out.estimate = out.trials ? static_cast<double>(out.exceedances) / out.trials : 0.0;
    out.ci = wilson_interval(out.exceedances, out.trials);
    return out;
}

struct EpsilonRate {
    double value = 0.0;
    Interval ci;  // bootstrap
};

// Smallest observed rate whose empirical overflow is <= eps: the empirical
// (1-eps)-quantile with exact tie handling, so that
// overflow_probability(samples, value) <= eps holds on the same trial set.
inline double epsilon_rate_point(const std::vector<double>& sorted, double eps) {
    std::size_t n = sorted.size();
    if (n == 0) throw ConfigError("epsilon_coding_rate: no samples");
    auto allowed = static_cast<std::size_t>(std::floor(eps * static_cast<double>(n) + 1e-9));
    std::size_t i = n;
    bool found = false;
    double best = 0.0;
    while (i > 0) {
        std::size_t j = i;
        while (j > 0 && sorted[j - 1] == sorted[i - 1]) --j;
        std::size_t geq = n - j;  // count of samples >= sorted[i-1]
        if (geq > allowed) break;
        best = sorted[i - 1];
        found = true;
        i = j;
    }
    // eps below the resolution of the sample: the quantile sits just above the
    // largest observation (overflow there is 0).
    if (!found) return std::nextafter(sorted[n - 1], std::numeric_limits<double>::infinity());
    return best;
}

inline EpsilonRate epsilon_coding_rate(const std::vector<double>& rate_samples, double eps,
                                       std::uint64_t seed, int bootstrap = 500) {
    if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("epsilon_coding_rate: eps must be in (0,1)");
    std::vector<double> sorted = rate_samples;
    std::sort(sorted.begin(), sorted.end());
    EpsilonRate out;
    out.value = epsilon_rate_point(sorted, eps);
    if (bootstrap > 0) {
        out.ci = bootstrap_ci(
            rate_samples,
            [eps](std::vector<double>& v) {
                std::sort(v.begin(), v.end());
                return epsilon_rate_point(v, eps);
            },
            bootstrap, seed);
    }
    return out;
}

struct BoundInputs {
    Pmf source;
    DistortionSpec spec;
    std::uint64_t dict_budget = 0;  // M
    double eps = 0.1;
    double upsilon = 4.0;
    double hessian_bound = 0.0;  // C_H
    double slack = 0.0;          // stands in for the O(1/log M) residual; default 0
};

struct BoundValue {
    double value = 0.0;
    double rate = 0.0;        // R(P,D)
    double sigma = 0.0;       // sqrt of the dispersion
    double third_coeff = 0.0; // upsilon + |X| - 1 + C_H (1 + |X|)
};

// Third-order achievable rate: R + sigma sqrt(R/log2 M) Q^{-1}(eps)
// + C_third R log2log2 M / log2 M [+ slack/log2 M].
inline BoundValue theorem_bound(const BoundInputs& b, double grad_step = 1e-5) {
    BoundValue out;
    RDOptions opt;
    RDResult rd = rate_distortion(b.source, b.spec, opt);
    if (!rd.converged) throw SolverError("theorem_bound: rate-distortion solve did not converge");
    RDSensitivity sens = rd_sensitivity(b.source, b.spec, grad_step);
    double log2m = std::log2(static_cast<double>(b.dict_budget));
    if (!(std::log2(log2m) > 0.0)) throw ConfigError("theorem_bound: need log2 log2 M > 0");
    double k = static_cast<double>(b.source.size());
    out.rate = rd.rate;
    out.sigma = std::sqrt(sens.dispersion);
    out.third_coeff = b.upsilon + k - 1.0 + b.hessian_bound * (1.0 + k);
    out.value = rd.rate + out.sigma * std::sqrt(rd.rate / log2m) * normal_upper_quantile(b.eps) +
                out.third_coeff * rd.rate * std::log2(log2m) / log2m + b.slack / log2m;
    return out;
}

struct HessianBoundReport {
    double c_h = 0.0;
    double radius = 0.0;
    std::size_t evaluated = 0;
    std::size_t skipped = 0;  // grid points where the curve is kinked
};

// Empirical certificate for the Hessian bound: max Frobenius norm over a grid
// in the ball of radius sqrt(2+2|X|) sqrt(ln n_R / n_R) around the source
// (n_R = log2 M / R(P,D)), intersected with the simplex interior. Points
// where the two gradient routes disagree (kinks) are skipped and counted.
inline HessianBoundReport estimate_hessian_bound(const Pmf& source, const DistortionSpec& spec,
                                                 std::uint64_t dict_budget, int grid_points = 13,
                                                 double interior_margin = 0.01,
                                                 double step = 1e-4) {
    source.validate();
    HessianBoundReport rep;
    RDResult rd = rate_distortion(source, spec);
    double log2m = std::log2(static_cast<double>(dict_budget));
    double n_r = rd.rate > 0.0 ? log2m / rd.rate : log2m;
    n_r = std::max(n_r, 3.0);
    double k = static_cast<double>(source.size());
    rep.radius = std::sqrt(2.0 + 2.0 * k) * std::sqrt(std::log(n_r) / n_r);

    // Product grid over the first |X|-1 coordinates; the last closes the sum.
    std::size_t axes = source.size() - 1;
    std::vector<int> idx(axes, 0);
    const double lo = -rep.radius, hi = rep.radius;
    auto coord = [&](int i) {
        return grid_points == 1 ? 0.0
                                : lo + (hi - lo) * static_cast<double>(i) / (grid_points - 1);
    };
    for (;;) {
        std::vector<double> q = source.probs();
        double shift_sum = 0.0, norm2 = 0.0;
        for (std::size_t a = 0; a < axes; ++a) {
            double s = coord(idx[a]);
            q[a] += s;
            shift_sum += s;
            norm2 += s * s;
        }
        q[axes] -= shift_sum;
        norm2 += shift_sum * shift_sum;
        bool valid = std::sqrt(norm2) <= rep.radius + 1e-12;
        for (double v : q)
            if (v < interior_margin) valid = false;
        if (valid) {
            try {
                RDSensitivity s = rd_sensitivity(Pmf(q), spec, step);
                rep.c_h = std::max(rep.c_h, s.hessian_fnorm);
                ++rep.evaluated;
            } catch (const SolverError&) {
                ++rep.skipped;
            } catch (const ConfigError&) {
                ++rep.skipped;
            }
        }
        std::size_t a = 0;
        for (; a < axes; ++a) {
            if (++idx[a] < grid_points) break;
            idx[a] = 0;
        }
        if (a == axes) break;
    }
    // Always include the source itself.
    try {
        RDSensitivity s = rd_sensitivity(source, spec, step);
        rep.c_h = std::max(rep.c_h, s.hessian_fnorm);
        ++rep.evaluated;
    } catch (const SolverError&) {
        ++rep.skipped;
    }

    // Binary refinement: the norm peaks just inside the positive-rate region,
    // between grid points when the grid straddles the zero-rate boundary.
    // Locate the boundary and probe a short ladder next to it.
    if (source.size() == 2) {
        auto rate_at = [&](double q) {
            return rate_distortion(Pmf({q, 1.0 - q}), spec).rate;
        };
        double lo_q = std::max(interior_margin, source[0] - rep.radius / std::sqrt(2.0));
        double hi_q = std::min(1.0 - interior_margin, source[0] + rep.radius / std::sqrt(2.0));
        for (double anchor : {lo_q, hi_q}) {
            if (!(anchor < source[0]) && !(anchor > source[0])) continue;
            double inner = source[0];
            if ((rate_at(anchor) == 0.0) == (rate_at(inner) == 0.0)) continue;
            double a = anchor, b = inner;  // rate differs across [a, b]
            for (int it = 0; it < 40; ++it) {
                double mid = 0.5 * (a + b);
                if ((rate_at(mid) == 0.0) == (rate_at(a) == 0.0)) a = mid; else b = mid;
            }
            double boundary = 0.5 * (a + b);
            double toward = inner > boundary ? 1.0 : -1.0;
            for (double off : {4.0, 16.0, 64.0}) {
                double q = boundary + toward * off * step;
                if (q < interior_margin || q > 1.0 - interior_margin) continue;
                if (std::fabs(q - source[0]) * std::sqrt(2.0) > rep.radius) continue;
                try {
                    RDSensitivity s = rd_sensitivity(Pmf({q, 1.0 - q}), spec, step);
                    rep.c_h = std::max(rep.c_h, s.hessian_fnorm);
                    ++rep.evaluated;
                } catch (const SolverError&) {
                    ++rep.skipped;
                } catch (const ConfigError&) {
                    ++rep.skipped;
                }
            }
        }
    }
    return rep;
}

struct DeltaScan {
    std::vector<double> n_values;
    std::vector<double> mean_delta;  // mean over sampled sequences of max_a [R(ext)-R]^+
    double beta = 0.0;               // fitted exponent in delta ~ n^-beta
    Interval beta_ci;
};

// Measures how much appending one letter can raise the empirical lossy rate,
// and fits the decay exponent in n.
inline DeltaScan extension_rate_delta_scan(const Pmf& source, const DistortionSpec& spec,
                                           const std::vector<std::size_t>& n_grid,
                                           std::size_t samples, std::uint64_t seed) {
    DeltaScan out;
    RateCache cache(spec);
    for (std::size_t gi = 0; gi < n_grid.size(); ++gi) {
        std::size_t n = n_grid[gi];
        double acc = 0.0;
        for (std::size_t s = 0; s < samples; ++s) {
            auto x = sample_stream(source, n, CounterRng::mix(seed, gi), s);
            TypeClass t;
            t.counts.assign(source.size(), 0);
            for (auto sym : x) ++t.counts[sym];
            double base = cache.per_symbol(t);
            double best = 0.0;
            for (std::size_t a = 0; a < source.size(); ++a)
                best = std::max(best, cache.per_symbol(extend(t, a)) - base);
            acc += std::max(0.0, best);
        }
        out.n_values.push_back(static_cast<double>(n));
        out.mean_delta.push_back(acc / static_cast<double>(samples));
    }
    // OLS of log2(mean delta) on log2 n; beta is minus the slope.
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (std::size_t i = 0; i < out.n_values.size(); ++i) {
        if (out.mean_delta[i] <= 0.0) continue;
        X.push_back({1.0, std::log2(out.n_values[i])});
        y.push_back(std::log2(out.mean_delta[i]));
    }
    if (X.size() >= 2) {
        auto beta = ols_fit(X, y);
        out.beta = -beta[1];
        // crude residual-based interval
        double rss = 0.0, sxx = 0.0, xbar = 0.0;
        for (auto& row : X) xbar += row[1];
        xbar /= static_cast<double>(X.size());
        for (std::size_t i = 0; i < X.size(); ++i) {
            double pred = beta[0] + beta[1] * X[i][1];
            rss += (y[i] - pred) * (y[i] - pred);
            sxx += (X[i][1] - xbar) * (X[i][1] - xbar);
        }
        double se = X.size() > 2 ? std::sqrt(rss / (X.size() - 2) / std::max(sxx, 1e-12)) : 0.0;
        out.beta_ci = {out.beta - 1.96 * se, out.beta + 1.96 * se};
    }
    return out;
}

struct DeviationMass {
    double mass = 0.0;
    double reference = 0.0;  // e^(|X|-1) / n^2
    bool exact = false;
    bool guarantee_applies = false;  // a^2 >= 2 + 2|X|
};

// Probability that the empirical pmf deviates from the source by more than
// a*sqrt(ln n / n) in Euclidean norm. Exact multinomial sum when the type
// enumeration is tractable, Monte-Carlo otherwise.
inline DeviationMass type_deviation_mass(const Pmf& source, std::size_t n, double a,
                                         std::uint64_t seed = 1,
                                         std::size_t mc_trials = 100000) {
    source.validate();
    if (a < 0.0) throw ConfigError("type_deviation_mass: a must be >= 0");
    DeviationMass out;
    double k = static_cast<double>(source.size());
    out.reference = std::exp(k - 1.0) / (static_cast<double>(n) * n);
    out.guarantee_applies = a * a >= 2.0 + 2.0 * k - 1e-9;
    double threshold = a * std::sqrt(std::log(static_cast<double>(n)) / n);

    double types_log2 = (k - 1.0) * std::log2(static_cast<double>(n) + 1.0);
    if (types_log2 <= 24.0) {
        out.exact = true;
        double log_mass = -std::numeric_limits<double>::infinity();
        std::vector<double> log_p(source.size());
        for (std::size_t i = 0; i < source.size(); ++i)
            log_p[i] = source[i] > 0.0 ? std::log(source[i]) : -std::numeric_limits<double>::infinity();
        for (auto& t : enumerate_types(n, source.size())) {
            Pmf q = t.pmf();
            if (q.l2_distance(source) <= threshold) continue;
            double lp = std::lgamma(static_cast<double>(n) + 1.0);
            bool zero = false;
            for (std::size_t i = 0; i < source.size(); ++i) {
                if (t.counts[i] == 0) continue;
                if (source[i] == 0.0) { zero = true; break; }
                lp += t.counts[i] * log_p[i] - std::lgamma(static_cast<double>(t.counts[i]) + 1.0);
            }
            if (zero) continue;
            if (log_mass == -std::numeric_limits<double>::infinity()) log_mass = lp;
            else {
                double m = std::max(log_mass, lp);
                log_mass = m + std::log(std::exp(log_mass - m) + std::exp(lp - m));
            }
        }
        out.mass = std::isfinite(log_mass) ? std::exp(log_mass) : 0.0;
    } else {
        std::uint64_t hits = 0;
        for (std::uint64_t tr = 0; tr < mc_trials; ++tr) {
            auto x = sample_stream(source, n, seed, tr);
            std::vector<double> emp(source.size(), 0.0);
            for (auto s : x) emp[s] += 1.0 / static_cast<double>(n);
            if (Pmf(emp).l2_distance(source) > threshold) ++hits;
        }
        out.mass = static_cast<double>(hits) / static_cast<double>(mc_trials);
    }
    return out;
}

}  // namespace vflossy
