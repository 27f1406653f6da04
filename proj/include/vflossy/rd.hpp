#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "vflossy/common.hpp"
#include "vflossy/pmf.hpp"

namespace vflossy {

struct RDResult {
    double rate = 0.0;             // bits/symbol
    double slope = 0.0;            // |dR/dD| at the solution, bits per unit distortion
    Pmf output_dist;               // optimal reproduction marginal
    int iterations = 0;            // total inner iterations across the slope search
    bool converged = false;
};

struct RDOptions {
    double tol = 1e-9;
    // Per-call cap on alternating-minimization steps. Probes at a slope where
    // the optimal support is exactly changing converge sublinearly; they burn
    // the cap and still bracket correctly, while ordinary solves finish in a
    // few thousand steps.
    int max_inner = 60000;
    int max_outer = 200;
};

namespace detail {

struct FixedSlopeSolve {
    double rate = 0.0;
    double dist = 0.0;
    std::vector<double> q;       // reproduction marginal
    std::vector<double> log2_z;  // log2 of the per-row partition sum
    int iterations = 0;
    bool converged = false;
};

// Alternating minimization of the Lagrangian I(X;Y) + lambda*E d at a fixed
// slope lambda (bits per unit distortion). `kernel` is 2^{-lambda d(x,y)}
// laid out row-major over the effective alphabets.
//
// Termination uses the duality gap log2 max_y c(y), where c is the
// multiplicative update of the reproduction marginal: the objective at the
// current iterate exceeds the optimum by at most that gap, so the stopping
// rule certifies the reported value directly and is immune to floating-point
// limit cycles in the iterates.
inline FixedSlopeSolve fixed_slope_am(const std::vector<double>& px,
                                      const std::vector<double>& kernel,
                                      const std::vector<double>& dist_mat, double lambda,
                                      double inner_tol, int max_inner) {
    std::size_t nx = px.size();
    std::size_t ny = kernel.size() / nx;
    FixedSlopeSolve out;
    out.q.assign(ny, 1.0 / static_cast<double>(ny));
    out.log2_z.assign(nx, 0.0);
    std::vector<double> z(nx), qn(ny);
    for (int it = 1; it <= max_inner; ++it) {
        for (std::size_t x = 0; x < nx; ++x) {
            double s = 0.0;
            const double* kr = &kernel[x * ny];
            for (std::size_t y = 0; y < ny; ++y) s += out.q[y] * kr[y];
            z[x] = s;
        }
        std::fill(qn.begin(), qn.end(), 0.0);
        for (std::size_t x = 0; x < nx; ++x) {
            const double* kr = &kernel[x * ny];
            double w = px[x] / z[x];
            for (std::size_t y = 0; y < ny; ++y) qn[y] += w * out.q[y] * kr[y];
        }
        double max_ratio = 0.0;
        for (std::size_t y = 0; y < ny; ++y)
            if (out.q[y] > 0.0) max_ratio = std::max(max_ratio, qn[y] / out.q[y]);
        out.q = qn;
        out.iterations = it;
        if (std::log2(max_ratio) < inner_tol) {
            out.converged = true;
            break;
        }
    }
    double edist = 0.0, rate = 0.0;
    for (std::size_t x = 0; x < nx; ++x) {
        const double* kr = &kernel[x * ny];
        const double* dr = &dist_mat[x * ny];
        double s = 0.0, sd = 0.0;
        for (std::size_t y = 0; y < ny; ++y) {
            double w = out.q[y] * kr[y];
            s += w;
            sd += w * dr[y];
        }
        out.log2_z[x] = std::log2(s);
        edist += px[x] * sd / s;
        rate -= px[x] * out.log2_z[x];
    }
    out.dist = edist;
    out.rate = std::max(0.0, rate - lambda * edist);
    return out;
}

inline std::vector<double> slope_kernel(const std::vector<double>& dist_mat, double lambda) {
    std::vector<double> k(dist_mat.size());
    for (std::size_t i = 0; i < k.size(); ++i) k[i] = std::exp2(-lambda * dist_mat[i]);
    return k;
}

}  // namespace detail

// Rate-distortion function R(Q,D) in bits: minimum mutual information over
// test channels meeting the expected distortion level. Alternating
// minimization at a fixed slope, with an outer search on the slope so the
// distortion constraint is met with equality (or rate 0 when it is slack at
// slope zero). Symbols with zero probability are dropped from the effective
// alphabet before solving.
inline RDResult rate_distortion(const Pmf& source, const DistortionSpec& spec,
                                const RDOptions& opt = {}) {
    source.validate();
    if (source.size() != spec.source_size())
        throw ConfigError("rate_distortion: source size does not match distortion matrix");
    if (!(opt.tol > 0.0)) throw ConfigError("rate_distortion: tol must be > 0");

    std::vector<std::size_t> sup;
    for (std::size_t x = 0; x < source.size(); ++x)
        if (source[x] > 0.0) sup.push_back(x);
    std::size_t nx = sup.size();
    std::size_t ny = spec.repro_size();
    std::vector<double> px(nx), dmat(nx * ny);
    for (std::size_t i = 0; i < nx; ++i) {
        px[i] = source[sup[i]];
        for (std::size_t y = 0; y < ny; ++y) dmat[i * ny + y] = spec(sup[i], y);
    }

    const double d_level = spec.level();
    double d_min = 0.0;
    for (std::size_t i = 0; i < nx; ++i) d_min += px[i] * *std::min_element(&dmat[i * ny], &dmat[i * ny] + ny);
    if (d_level < d_min - 1e-12)
        throw ConfigError("rate_distortion: distortion level below the minimum achievable " +
                          std::to_string(d_min));

    RDResult res;

    // Zero-rate region: a single reproduction letter already meets the level.
    Pmf full_source_view(source.probs());
    double d_zero = spec.zero_rate_level(full_source_view);
    if (d_level >= d_zero - 1e-14) {
        std::vector<double> q(ny, 0.0);
        q[spec.best_single_letter(full_source_view)] = 1.0;
        res.rate = 0.0;
        res.slope = 0.0;
        res.output_dist = Pmf(std::move(q));
        res.converged = true;
        return res;
    }

    const double inner_tol = std::min(opt.tol / 10.0, 1e-10);

    // Constraint pinned at the bottom of the curve: only minimum-distortion
    // transitions are admissible (covers D = 0).
    if (d_level <= d_min + 1e-14) {
        std::vector<double> kernel(nx * ny, 0.0);
        for (std::size_t i = 0; i < nx; ++i) {
            double m = *std::min_element(&dmat[i * ny], &dmat[i * ny] + ny);
            for (std::size_t y = 0; y < ny; ++y)
                if (dmat[i * ny + y] <= m) kernel[i * ny + y] = 1.0;
        }
        auto s = detail::fixed_slope_am(px, kernel, dmat, 0.0, inner_tol, opt.max_inner);
        res.rate = s.rate;  // at slope zero with the indicator kernel this is plain I(X;Y)
        res.slope = std::numeric_limits<double>::infinity();
        res.output_dist = Pmf(s.q);
        res.iterations = s.iterations;
        res.converged = s.converged;
        return res;
    }

    // Bracket the slope: distortion at fixed slope is non-increasing in the
    // slope, D(0) = d_zero > d_level > d_min.
    double lo = 0.0, hi = 1.0;
    detail::FixedSlopeSolve sol_hi;
    int total_iters = 0;
    for (int g = 0; g < 80; ++g) {
        sol_hi = detail::fixed_slope_am(px, detail::slope_kernel(dmat, hi), dmat, hi, inner_tol,
                                        opt.max_inner);
        total_iters += sol_hi.iterations;
        if (sol_hi.dist <= d_level) break;
        lo = hi;
        hi *= 2.0;
    }

    const double dist_tol = opt.tol * std::max(1.0, d_level);
    detail::FixedSlopeSolve best = sol_hi;
    double lambda = hi;
    int outer = 0;
    for (; outer < opt.max_outer; ++outer) {
        if (std::fabs(best.dist - d_level) < dist_tol) break;
        if (hi - lo < 1e-13 * std::max(1.0, hi)) break;
        double mid = 0.5 * (lo + hi);
        auto s = detail::fixed_slope_am(px, detail::slope_kernel(dmat, mid), dmat, mid, inner_tol,
                                        opt.max_inner);
        total_iters += s.iterations;
        if (s.dist > d_level) lo = mid; else hi = mid;
        best = s;
        lambda = mid;
    }

    // Lagrangian correction: exact on linear segments of the curve, negligible
    // elsewhere once the bisection has closed in.
    res.rate = std::max(0.0, best.rate + lambda * (best.dist - d_level));
    res.slope = lambda;
    res.output_dist = Pmf(best.q);
    res.iterations = total_iters;
    // The flag reflects the solve the result is read from; bracketing probes
    // at support-change slopes may individually time out without affecting it.
    res.converged = best.converged && (outer < opt.max_outer);
    return res;
}

struct RDSensitivity {
    std::vector<double> gradient;  // normalized so the source-weighted mean equals the rate
    double hessian_fnorm = 0.0;
    double dispersion = 0.0;       // Var of the gradient component under the source
};

namespace detail {

inline double rate_at(const std::vector<double>& probs, const DistortionSpec& spec,
                      const RDOptions& opt) {
    double s = 0.0;
    for (double v : probs) s += v;
    std::vector<double> norm(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) norm[i] = probs[i] / s;
    return rate_distortion(Pmf(std::move(norm)), spec, opt).rate;
}

}  // namespace detail

// Gradient, Hessian norm and dispersion of R(P, D) in the source coordinates.
// The gradient is computed two ways (central finite differences along the
// simplex, and the closed form from the converged slope and reproduction
// marginal) and cross-checked; disagreement signals a kink in the curve.
inline RDSensitivity rd_sensitivity(const Pmf& source, const DistortionSpec& spec, double step,
                                    const RDOptions& base_opt = {}) {
    source.validate();
    if (!(step > 0.0) || step > 1e-2) throw ConfigError("rd_sensitivity: step must be in (0, 1e-2]");
    for (std::size_t i = 0; i < source.size(); ++i)
        if (source[i] < step)
            throw ConfigError("rd_sensitivity: source must be interior (entry " +
                              std::to_string(i) + " < step)");

    RDOptions opt = base_opt;
    opt.tol = std::min(opt.tol, 1e-11);
    std::size_t n = source.size();

    RDResult base = rate_distortion(source, spec, opt);
    if (!base.converged) throw SolverError("rd_sensitivity: base solve did not converge");

    // Closed-form gradient from the optimal slope and reproduction marginal:
    // component i is -lambda*D - log2 sum_y q*(y) 2^{-lambda d(i,y)}, which has
    // source-weighted mean equal to the rate.
    std::vector<double> kkt(n, 0.0);
    if (base.rate <= 0.0) {
        std::fill(kkt.begin(), kkt.end(), 0.0);
    } else if (std::isinf(base.slope)) {
        // Bottom of the curve: only minimum-distortion transitions are active.
        for (std::size_t x = 0; x < n; ++x) {
            double m = spec.min_in_row(x);
            double z = 0.0;
            for (std::size_t y = 0; y < spec.repro_size(); ++y)
                if (spec(x, y) <= m) z += base.output_dist[y];
            kkt[x] = -std::log2(std::max(z, 1e-300));
        }
        double mean = 0.0;
        for (std::size_t x = 0; x < n; ++x) mean += source[x] * kkt[x];
        for (std::size_t x = 0; x < n; ++x) kkt[x] += base.rate - mean;
    } else {
        for (std::size_t x = 0; x < n; ++x) {
            double z = 0.0;
            for (std::size_t y = 0; y < spec.repro_size(); ++y)
                z += base.output_dist[y] * std::exp2(-base.slope * spec(x, y));
            kkt[x] = -base.slope * spec.level() - std::log2(std::max(z, 1e-300));
        }
    }

    // Finite differences of R(normalize(P + t e_i)); this yields the gradient
    // centered to zero source-weighted mean, a gauge both routes share.
    std::vector<double> fd(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> plus = source.probs(), minus = source.probs();
        plus[i] += step;
        minus[i] -= step;
        fd[i] = (detail::rate_at(plus, spec, opt) - detail::rate_at(minus, spec, opt)) / (2.0 * step);
    }

    double kkt_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) kkt_mean += source[i] * kkt[i];
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        worst = std::max(worst, std::fabs(fd[i] - (kkt[i] - kkt_mean)));
    if (worst > 10.0 * step)
        throw SolverError("rd_sensitivity: gradient routes disagree by " + std::to_string(worst) +
                          " (rate-distortion curve is not differentiable here)");

    RDSensitivity out;
    out.gradient = kkt;
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double c = kkt[i] - kkt_mean;
        var += source[i] * c * c;
    }
    out.dispersion = var;

    // Finite-difference Hessian of R(normalize(P + v)).
    double h = std::max(step, 1e-4);
    double f0 = base.rate;
    std::vector<double> hess(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> pp = source.probs(), pm = source.probs();
        pp[i] += h;
        pm[i] -= h;
        double fp = detail::rate_at(pp, spec, opt), fm = detail::rate_at(pm, spec, opt);
        hess[i * n + i] = (fp - 2.0 * f0 + fm) / (h * h);
        for (std::size_t j = i + 1; j < n; ++j) {
            auto eval = [&](double si, double sj) {
                std::vector<double> v = source.probs();
                v[i] += si;
                v[j] += sj;
                return detail::rate_at(v, spec, opt);
            };
            double mixed = (eval(h, h) - eval(h, -h) - eval(-h, h) + eval(-h, -h)) / (4.0 * h * h);
            hess[i * n + j] = hess[j * n + i] = mixed;
        }
    }
    double fn = 0.0;
    for (double v : hess) fn += v * v;
    out.hessian_fnorm = std::sqrt(fn);
    return out;
}

// Operational lossy rate R0(P,Q,D): infimum over test channels of mutual
// information plus divergence of the induced marginal from Q. Computed via
// the concave dual max_{lambda>=0} [-lambda D - sum_x P(x) log2 sum_y Q(y)
// 2^{-lambda d(x,y)}]. Returns +infinity when Q's support cannot reach the
// distortion level.
inline double operational_rate(const Pmf& source, const Pmf& output, const DistortionSpec& spec) {
    source.validate();
    output.validate();
    if (source.size() != spec.source_size() || output.size() != spec.repro_size())
        throw ConfigError("operational_rate: alphabet mismatch");
    const double d_level = spec.level();

    double d_inf = 0.0;
    for (std::size_t x = 0; x < source.size(); ++x) {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t y = 0; y < output.size(); ++y)
            if (output[y] > 0.0) m = std::min(m, spec(x, y));
        d_inf += source[x] * m;
    }
    if (d_level < d_inf - 1e-13) return std::numeric_limits<double>::infinity();

    auto stats = [&](double lambda) {
        double g = -lambda * d_level, ed = 0.0;
        for (std::size_t x = 0; x < source.size(); ++x) {
            if (source[x] == 0.0) continue;
            double z = 0.0, zd = 0.0;
            for (std::size_t y = 0; y < output.size(); ++y) {
                if (output[y] == 0.0) continue;
                double w = output[y] * std::exp2(-lambda * spec(x, y));
                z += w;
                zd += w * spec(x, y);
            }
            g -= source[x] * std::log2(z);
            ed += source[x] * zd / z;
        }
        return std::pair<double, double>{g, ed};
    };

    auto [g0, ed0] = stats(0.0);
    if (ed0 <= d_level) return 0.0;

    double lo = 0.0, hi = 1.0;
    bool bracketed = false;
    for (int g = 0; g < 60; ++g) {
        auto [gv, ed] = stats(hi);
        if (ed <= d_level) { bracketed = true; break; }
        lo = hi;
        hi *= 2.0;
    }
    if (!bracketed) {
        // Distortion level sits exactly at the bottom of Q's reach; take the
        // slope -> infinity limit of the dual.
        double g = 0.0;
        for (std::size_t x = 0; x < source.size(); ++x) {
            if (source[x] == 0.0) continue;
            double m = std::numeric_limits<double>::infinity();
            for (std::size_t y = 0; y < output.size(); ++y)
                if (output[y] > 0.0) m = std::min(m, spec(x, y));
            double z = 0.0;
            for (std::size_t y = 0; y < output.size(); ++y)
                if (output[y] > 0.0 && spec(x, y) <= m) z += output[y];
            g += source[x] * (-std::log2(z) + 0.0);
        }
        return std::max(0.0, g);
    }
    double glast = 0.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        auto [gv, ed] = stats(mid);
        glast = gv;
        if (std::fabs(ed - d_level) < 1e-13 * std::max(1.0, d_level)) break;
        if (ed > d_level) lo = mid; else hi = mid;
        if (hi - lo < 1e-15 * std::max(1.0, hi)) break;
    }
    return std::max(0.0, glast);
}

}  // namespace vflossy
