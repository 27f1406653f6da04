#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "vflossy/analysis.hpp"
#include "vflossy/experiment.hpp"

#include "oracles.hpp"

using namespace vflossy;

namespace {

Dictionary small_dict(double level, std::uint64_t budget, std::uint64_t seed = 31) {
    DistortionSpec spec = DistortionSpec::hamming(2, level);
    RateCache cache(spec);
    BuildOptions opt;
    opt.seed = seed;
    detail::CoverSizeCache covers;
    GammaSearch gs = choose_gamma(budget, cache, opt, 1.0, &covers);
    return build_dictionary(gs.gamma, cache, budget, opt, &covers);
}

}  // namespace

TEST_CASE("streams are reproducible and honor degenerate sources", "[analysis]") {
    REQUIRE(sample_stream(Pmf({1.0, 0.0}), 64, 9) == std::vector<std::uint8_t>(64, 0));
    REQUIRE(sample_stream(Pmf({0.3, 0.7}), 512, 5, 2) == sample_stream(Pmf({0.3, 0.7}), 512, 5, 2));
    REQUIRE(sample_stream(Pmf({0.3, 0.7}), 512, 5, 2) != sample_stream(Pmf({0.3, 0.7}), 512, 5, 3));
}

TEST_CASE("empirical frequency concentrates at CLT scale", "[analysis]") {
    auto x = sample_stream(Pmf({0.3, 0.7}), 1000000, 17);
    double ones = 0;
    for (auto s : x) ones += s == 0 ? 1.0 : 0.0;
    REQUIRE(std::fabs(ones / 1e6 - 0.3) < 0.005);
}

TEST_CASE("inverse normal quantile is accurate to 1e-9", "[analysis]") {
    for (auto& ref : oracles::kUpperQuantiles)
        REQUIRE(std::fabs(normal_upper_quantile(ref.eps) - ref.value) < 1e-9);
}

TEST_CASE("overflow probability endpoints", "[analysis]") {
    Dictionary d = small_dict(0.1, 256);
    TrialSet set = run_parse_trials(Pmf({0.3, 0.7}), d, 3000, 11);
    auto samples = set.rate_samples();
    REQUIRE(overflow_probability(samples, 0.0).estimate == 1.0);
    REQUIRE(overflow_probability(samples, d.index_width + 1.0).estimate == 0.0);

    // at the sample median the overflow cannot drop below one half
    auto sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    auto at_median = overflow_probability(samples, sorted[sorted.size() / 2]);
    REQUIRE(at_median.estimate >= 0.5 - 1.0 / static_cast<double>(samples.size()));
    REQUIRE(at_median.ci.lo <= at_median.estimate);
    REQUIRE(at_median.ci.hi >= at_median.estimate);
}

TEST_CASE("trial runs are schedule independent", "[analysis]") {
    Dictionary d = small_dict(0.1, 256);
    TrialSet a = run_parse_trials(Pmf({0.3, 0.7}), d, 2000, 77, 1);
    TrialSet b = run_parse_trials(Pmf({0.3, 0.7}), d, 2000, 77, 2);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        REQUIRE(a.records[i].length == b.records[i].length);
        REQUIRE(a.records[i].rate_sample == b.records[i].rate_sample);
    }
}

TEST_CASE("epsilon-coding rate quantile semantics", "[analysis]") {
    std::vector<double> samples{1.0, 1.0, 2.0, 2.0, 2.0, 3.0, 4.0, 4.0, 4.0, 8.0};
    // overflow(8)=0.1, overflow(4)=0.4, overflow(3)=0.5 ...
    REQUIRE(epsilon_coding_rate(samples, 0.10, 1, 0).value == 8.0);
    REQUIRE(epsilon_coding_rate(samples, 0.45, 1, 0).value == 4.0);
    REQUIRE(epsilon_coding_rate(samples, 0.999, 1, 0).value == 2.0);
    REQUIRE(epsilon_coding_rate(samples, 0.05, 1, 0).value ==
            std::nextafter(8.0, std::numeric_limits<double>::infinity()));

    // monotone in eps on a fixed set
    double prev = std::numeric_limits<double>::infinity();
    for (double eps : {0.05, 0.1, 0.2, 0.5, 0.9}) {
        double v = epsilon_coding_rate(samples, eps, 1, 0).value;
        REQUIRE(v <= prev);
        prev = v;
    }
}

TEST_CASE("epsilon-coding rate on parses: sanity and degenerate cases", "[analysis]") {
    Dictionary d = small_dict(0.1, 256);
    TrialSet set = run_parse_trials(Pmf({0.3, 0.7}), d, 5000, 10);
    auto samples = set.rate_samples();
    for (double eps : {0.05, 0.1, 0.25, 0.5}) {
        double r = epsilon_coding_rate(samples, eps, 3).value;
        REQUIRE(overflow_probability(samples, r).estimate <= eps);  // exact, by construction
    }

    // a deterministic source parses to one segment length, so the quantile is
    // flat in eps
    Dictionary tiny = small_dict(0.1, 32);
    TrialSet det = run_parse_trials(Pmf({1.0, 0.0}), tiny, 200, 10);
    REQUIRE(det.censored == 0);
    auto ds = det.rate_samples();
    REQUIRE(*std::min_element(ds.begin(), ds.end()) ==
            *std::max_element(ds.begin(), ds.end()));
    double v = epsilon_coding_rate(ds, 0.3, 1, 0).value;
    for (double eps : {0.1, 0.5, 0.9})
        REQUIRE(epsilon_coding_rate(ds, eps, 1, 0).value == v);
}

TEST_CASE("third-order bound formula and its degenerate cases", "[analysis]") {
    DistortionSpec spec = DistortionSpec::hamming(2, 0.1);

    BoundInputs b;
    b.source = Pmf({0.5, 0.5});
    b.spec = spec;
    b.dict_budget = 1 << 16;
    b.eps = 0.1;
    b.upsilon = 4.0;
    b.hessian_bound = 10.0;
    BoundValue v = theorem_bound(b);
    // symmetric source: dispersion vanishes, only first and third order remain
    double c3 = 4.0 + 2.0 - 1.0 + 10.0 * 3.0;
    double expect = v.rate * (1.0 + c3 * std::log2(16.0) / 16.0);
    REQUIRE(v.sigma < 1e-6);
    REQUIRE(std::fabs(v.value - expect) < 1e-5);

    // median case: the second-order term vanishes
    BoundInputs bm = b;
    bm.source = Pmf({0.3, 0.7});
    bm.eps = 0.5;
    BoundValue vm = theorem_bound(bm);
    REQUIRE(std::fabs(vm.value - (vm.rate + c3 * vm.rate * std::log2(16.0) / 16.0)) < 1e-9);

    // plug-in check against oracle arithmetic
    BoundInputs bp = b;
    bp.source = Pmf({0.3, 0.7});
    bp.eps = 0.1;
    bp.hessian_bound = 5.0;
    BoundValue vp = theorem_bound(bp);
    double r = oracles::binary_hamming_rate(0.3, 0.1);
    double sigma = std::sqrt(oracles::binary_varentropy(0.3));
    double expect_p = r + sigma * std::sqrt(r / 16.0) * 1.2815515655446004 +
                      (4.0 + 1.0 + 5.0 * 3.0) * r * 4.0 / 16.0;
    REQUIRE(std::fabs(vp.value - expect_p) < 1e-5);
}

TEST_CASE("hessian bound certificate covers the source point", "[analysis]") {
    HessianBoundReport rep =
        estimate_hessian_bound(Pmf({0.3, 0.7}), DistortionSpec::hamming(2, 0.1), 1 << 12, 5);
    REQUIRE(rep.c_h >= oracles::binary_hamming_hessian_fnorm(0.3) - 0.1);
    REQUIRE(rep.evaluated > 0);
}

TEST_CASE("extension-rate deltas vanish when the type is unchanged in shape", "[analysis]") {
    RateCache cache(DistortionSpec::hamming(2, 0.0));
    TypeClass t{{12, 0}};
    REQUIRE(cache.per_symbol(extend(t, 0)) - cache.per_symbol(t) == 0.0);
}

TEST_CASE("extension-rate decay exponent is near first order, not second", "[analysis]") {
    DeltaScan scan = extension_rate_delta_scan(Pmf({0.3, 0.7}), DistortionSpec::hamming(2, 0.1),
                                               {16, 32, 64, 128, 256, 512, 1024}, 64, 5);
    INFO("beta = " << scan.beta << " ci [" << scan.beta_ci.lo << "," << scan.beta_ci.hi << "]");
    REQUIRE(scan.beta > 0.3);
    REQUIRE(scan.beta < 1.7);
    WARN("extension-rate decay beta=" << scan.beta
                                      << " (1/n^2 decay would give beta near 2)");
}

TEST_CASE("deviation mass: exact route matches the binomial oracle", "[analysis]") {
    Pmf p({0.5, 0.5});
    for (std::size_t n : {20, 50, 100}) {
        for (double a : {1.0, 2.0, std::sqrt(6.0)}) {
            DeviationMass m = type_deviation_mass(p, n, a);
            REQUIRE(m.exact);
            double thr = a * std::sqrt(std::log(static_cast<double>(n)) / n);
            REQUIRE(m.mass == Catch::Approx(oracles::binary_deviation_mass(0.5, n, thr))
                                  .margin(1e-12));
        }
    }
}

TEST_CASE("deviation mass at blocklength one is zero or one", "[analysis]") {
    // ln(1) = 0 makes the radius vanish at n = 1, so the mass is the full
    // probability of landing off the source pmf exactly.
    DeviationMass m = type_deviation_mass(Pmf({0.6, 0.4}), 1, 2.5);
    REQUIRE(m.mass == Catch::Approx(1.0).margin(1e-12));
    DeviationMass m2 = type_deviation_mass(Pmf({1.0, 0.0}), 1, 2.5);
    REQUIRE(m2.mass == 0.0);
}

TEST_CASE("deviation mass is non-increasing in the radius and meets the reference",
          "[analysis][property]") {
    Pmf p({0.5, 0.5});
    double prev = 1.1;
    for (double a : {0.5, 1.0, 1.5, 2.0, 2.5, std::sqrt(6.0), 3.0}) {
        double mass = type_deviation_mass(p, 100, a).mass;
        REQUIRE(mass <= prev + 1e-15);
        prev = mass;
    }
    for (std::size_t n : {50, 100, 200}) {
        DeviationMass m = type_deviation_mass(p, n, std::sqrt(6.0));
        REQUIRE(m.guarantee_applies);
        REQUIRE(m.mass <= m.reference);
    }
}

TEST_CASE("wilson interval endpoints", "[analysis]") {
    auto z = wilson_interval(0, 100);
    REQUIRE(z.lo < 1e-15);
    REQUIRE(z.hi == Catch::Approx(0.0369930394).margin(1e-6));
    auto mid = wilson_interval(10, 100);
    REQUIRE(mid.lo < 0.1);
    REQUIRE(mid.hi > 0.1);
}

TEST_CASE("censored parses sit below every useful quantile", "[analysis]") {
    // A dictionary whose scan cap is tiny forces censoring for a source whose
    // rate process climbs slowly.
    DistortionSpec spec = DistortionSpec::hamming(2, 0.1);
    RateCache cache(spec);
    BuildOptions opt;
    opt.r_min = 2.0;  // scan cap = 2*gamma: deliberately small
    Dictionary d = build_dictionary(3.0, cache, 4096, opt);
    TrialSet set = run_parse_trials(Pmf({0.12, 0.88}), d, 500, 8);
    REQUIRE(set.censored > 0);
    for (auto& r : set.records)
        if (r.censored) REQUIRE(r.rate_sample < static_cast<double>(d.index_width) / d.scan_cap);
}
