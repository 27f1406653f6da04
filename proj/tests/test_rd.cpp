#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "vflossy/rd.hpp"
#include "vflossy/rng.hpp"

#include "oracles.hpp"

using namespace vflossy;

namespace {

std::vector<std::pair<double, double>> oracle_grid() {
    // 50 (p, D) points with D strictly below the critical distortion.
    std::vector<std::pair<double, double>> grid;
    for (int i = 0; i < 25; ++i) {
        double p = 0.12 + 0.38 * i / 24.0;
        double crit = std::min(p, 1.0 - p);
        grid.emplace_back(p, 0.3 * crit);
        grid.emplace_back(p, 0.7 * crit);
    }
    return grid;
}

}  // namespace

TEST_CASE("binary-Hamming rate matches the closed form", "[rd]") {
    for (auto [p, d] : oracle_grid()) {
        DistortionSpec spec = DistortionSpec::hamming(2, d);
        RDResult r = rate_distortion(Pmf({p, 1.0 - p}), spec);
        REQUIRE(r.converged);
        REQUIRE(std::fabs(r.rate - oracles::binary_hamming_rate(p, d)) < 1e-6);
        REQUIRE(r.rate >= 0.0);
    }
}

TEST_CASE("zero distortion reduces to entropy", "[rd]") {
    DistortionSpec spec = DistortionSpec::hamming(2, 0.0);
    Pmf p({0.3, 0.7});
    REQUIRE(std::fabs(rate_distortion(p, spec).rate - p.entropy()) < 1e-9);

    DistortionSpec spec3 = DistortionSpec::hamming(3, 0.0);
    Pmf q({0.2, 0.3, 0.5});
    REQUIRE(std::fabs(rate_distortion(q, spec3).rate - q.entropy()) < 1e-9);
}

TEST_CASE("rate is zero at or above the zero-rate level", "[rd]") {
    DistortionSpec spec = DistortionSpec::hamming(2, 0.3);
    RDResult r = rate_distortion(Pmf({0.3, 0.7}), spec);
    REQUIRE(r.rate == 0.0);
    REQUIRE(r.slope == 0.0);
    REQUIRE(r.output_dist[1] == 1.0);  // point mass on the better letter

    RDResult r2 = rate_distortion(Pmf({0.3, 0.7}), DistortionSpec::hamming(2, 0.9));
    REQUIRE(r2.rate == 0.0);
}

TEST_CASE("infeasible level is rejected", "[rd]") {
    DistortionSpec spec(2, 2, {1.0, 2.0, 3.0, 1.0}, 0.5);
    REQUIRE_THROWS_AS(rate_distortion(Pmf({0.5, 0.5}), spec), ConfigError);
}

TEST_CASE("non-convergence is flagged, not silent", "[rd]") {
    RDOptions opt;
    opt.max_inner = 1;
    RDResult r = rate_distortion(Pmf({0.3, 0.7}), DistortionSpec::hamming(2, 0.1), opt);
    REQUIRE_FALSE(r.converged);
}

TEST_CASE("rate is non-increasing and midpoint-convex in D", "[rd][property]") {
    CounterRng rng(2024, 0);
    for (int trial = 0; trial < 8; ++trial) {
        double p = 0.05 + 0.9 * rng.next_double();
        Pmf src({p, 1.0 - p});
        std::vector<double> ds, rates;
        for (int i = 0; i <= 10; ++i) {
            double d = 0.05 * i;
            ds.push_back(d);
            rates.push_back(rate_distortion(src, DistortionSpec::hamming(2, d)).rate);
        }
        for (std::size_t i = 1; i < rates.size(); ++i) REQUIRE(rates[i] <= rates[i - 1] + 1e-9);
        for (std::size_t i = 0; i + 2 < rates.size(); ++i) {
            double mid = rate_distortion(src, DistortionSpec::hamming(2, (ds[i] + ds[i + 2]) / 2)).rate;
            REQUIRE(mid <= 0.5 * (rates[i] + rates[i + 2]) + 1e-7);
        }
    }
}

TEST_CASE("gradient routes agree and dispersion matches the varentropy", "[rd]") {
    for (double step : {1e-4, 1e-5}) {
        for (auto [p, d] : {std::pair{0.3, 0.1}, {0.25, 0.05}, {0.4, 0.12}}) {
            DistortionSpec spec = DistortionSpec::hamming(2, d);
            RDSensitivity s = rd_sensitivity(Pmf({p, 1.0 - p}), spec, step);  // throws on mismatch
            REQUIRE(std::fabs(s.dispersion - oracles::binary_varentropy(p)) < 1e-5);
        }
    }
}

TEST_CASE("tilted gradient has source-weighted mean equal to the rate", "[rd]") {
    Pmf src({0.3, 0.7});
    DistortionSpec spec = DistortionSpec::hamming(2, 0.1);
    RDResult r = rate_distortion(src, spec);
    RDSensitivity s = rd_sensitivity(src, spec, 1e-5);
    double mean = src[0] * s.gradient[0] + src[1] * s.gradient[1];
    REQUIRE(std::fabs(mean - r.rate) < 1e-8);
    // the dispersion is the source-weighted variance of the components, so it
    // is unchanged by any constant shift of the gradient gauge
    double var = src[0] * (s.gradient[0] - mean) * (s.gradient[0] - mean) +
                 src[1] * (s.gradient[1] - mean) * (s.gradient[1] - mean);
    REQUIRE(var == Catch::Approx(s.dispersion).margin(1e-12));
    // Below the critical distortion the components are -log2 p_i - h2(D).
    REQUIRE(std::fabs(s.gradient[0] - (-std::log2(0.3) - oracles::h2(0.1))) < 1e-6);
    REQUIRE(std::fabs(s.gradient[1] - (-std::log2(0.7) - oracles::h2(0.1))) < 1e-6);
}

TEST_CASE("uniform source has zero dispersion", "[rd]") {
    RDSensitivity s = rd_sensitivity(Pmf({0.5, 0.5}), DistortionSpec::hamming(2, 0.1), 1e-5);
    REQUIRE(s.dispersion < 1e-10);
}

TEST_CASE("dispersion at zero distortion is the varentropy", "[rd]") {
    RDSensitivity s = rd_sensitivity(Pmf({0.3, 0.7}), DistortionSpec::hamming(2, 0.0), 1e-5);
    REQUIRE(std::fabs(s.dispersion - oracles::binary_varentropy(0.3)) < 1e-5);
}

TEST_CASE("sensitivity detects the kink at the zero-rate boundary", "[rd]") {
    // R(p, D) is kinked in p where the rate hits zero (p = D).
    REQUIRE_THROWS_AS(rd_sensitivity(Pmf({0.1, 0.9}), DistortionSpec::hamming(2, 0.1), 1e-5),
                      SolverError);
}

TEST_CASE("hessian norm matches the analytic binary-Hamming value", "[rd]") {
    for (auto [p, d] : {std::pair{0.3, 0.1}, {0.4, 0.05}}) {
        RDSensitivity s = rd_sensitivity(Pmf({p, 1.0 - p}), DistortionSpec::hamming(2, d), 1e-4);
        REQUIRE(std::fabs(s.hessian_fnorm - oracles::binary_hamming_hessian_fnorm(p)) < 5e-2);
    }
}

TEST_CASE("operational rate at the optimal output equals the rate-distortion value", "[rd]") {
    for (auto [p, d] : {std::pair{0.3, 0.1}, {0.2, 0.05}, {0.45, 0.2}}) {
        DistortionSpec spec = DistortionSpec::hamming(2, d);
        Pmf src({p, 1.0 - p});
        RDResult r = rate_distortion(src, spec);
        REQUIRE(std::fabs(operational_rate(src, r.output_dist, spec) - r.rate) < 1e-6);
    }
}

TEST_CASE("operational rate vanishes when the level dominates the matrix", "[rd]") {
    DistortionSpec spec = DistortionSpec::hamming(2, 1.0);
    REQUIRE(operational_rate(Pmf({0.3, 0.7}), Pmf({0.9, 0.1}), spec) == 0.0);
}

TEST_CASE("operational rate dual matches a primal grid search", "[rd]") {
    DistortionSpec spec = DistortionSpec::hamming(2, 0.1);
    Pmf src({0.5, 0.5});
    Pmf out({0.9, 0.1});
    double dual = operational_rate(src, out, spec);
    double primal =
        oracles::binary_operational_rate_grid(0.5, {0.9, 0.1}, {0.0, 1.0, 1.0, 0.0}, 0.1);
    REQUIRE(primal >= dual - 1e-9);  // grid points are feasible, dual is a lower bound
    REQUIRE(std::fabs(primal - dual) < 1e-4);
}

TEST_CASE("operational rate is +infinity when the output support cannot reach D", "[rd]") {
    DistortionSpec spec = DistortionSpec::hamming(2, 0.3);
    double v = operational_rate(Pmf({0.5, 0.5}), Pmf({1.0, 0.0}), spec);
    REQUIRE(std::isinf(v));
}

TEST_CASE("dual consistency across an output grid", "[rd][property]") {
    DistortionSpec spec = DistortionSpec::hamming(2, 0.1);
    Pmf src({0.3, 0.7});
    double rate = rate_distortion(src, spec).rate;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 1; i < 200; ++i) {
        double q = i / 200.0;
        best = std::min(best, operational_rate(src, Pmf({q, 1.0 - q}), spec));
    }
    REQUIRE(best >= rate - 1e-4);
    REQUIRE(best <= rate + 1e-3);  // grid resolution
}
