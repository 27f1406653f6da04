#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "vflossy/common.hpp"
#include "vflossy/pmf.hpp"
#include "vflossy/rd.hpp"
#include "vflossy/rng.hpp"

namespace vflossy {

// Count vector over the source alphabet at a fixed blocklength.
struct TypeClass {
    std::vector<std::uint32_t> counts;

    std::size_t n() const {
        std::size_t s = 0;
        for (auto c : counts) s += c;
        return s;
    }

    Pmf pmf() const {
        std::size_t total = n();
        if (total == 0) throw ConfigError("type class: empty");
        std::vector<double> p(counts.size());
        for (std::size_t i = 0; i < counts.size(); ++i)
            p[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
        return Pmf(std::move(p));
    }

    // log2 of the number of sequences in the class.
    double size_log2() const {
        double v = std::lgamma(static_cast<double>(n()) + 1.0);
        for (auto c : counts) v -= std::lgamma(static_cast<double>(c) + 1.0);
        return v * kLog2E;
    }

    bool operator==(const TypeClass& o) const { return counts == o.counts; }
    bool operator<(const TypeClass& o) const { return counts < o.counts; }
};

struct TypeClassHash {
    std::size_t operator()(const TypeClass& t) const {
        std::uint64_t h = 1469598103934665603ull;
        for (auto c : t.counts) {
            h ^= c;
            h *= 1099511628211ull;
        }
        return static_cast<std::size_t>(h);
    }
};

inline std::uint64_t count_compositions(std::uint64_t n, std::uint32_t k) {
    // C(n + k - 1, k - 1) with overflow detection.
    long double v = 1.0L;
    std::uint64_t num = n + k - 1;
    for (std::uint32_t i = 1; i < k; ++i) v = v * static_cast<long double>(num - i + 1) / i;
    if (v > 4.6e18L) throw ConfigError("enumerate_types: type count overflows 64 bits");
    // Exact integer recomputation.
    std::uint64_t res = 1;
    for (std::uint32_t i = 1; i < k; ++i) {
        res = res * (num - i + 1);
        res /= i;  // binomial prefix products are divisible
    }
    return res;
}

// All compositions of n into `alphabet_size` parts, ascending lexicographic
// order of the count vectors.
inline std::vector<TypeClass> enumerate_types(std::size_t n, std::size_t alphabet_size) {
    if (n < 1 || alphabet_size < 2) throw ConfigError("enumerate_types: need n >= 1, alphabet >= 2");
    count_compositions(n, static_cast<std::uint32_t>(alphabet_size));  // overflow guard
    std::vector<TypeClass> out;
    std::vector<std::uint32_t> cur(alphabet_size, 0);
    std::function<void(std::size_t, std::uint32_t)> rec = [&](std::size_t idx, std::uint32_t left) {
        if (idx + 1 == alphabet_size) {
            cur[idx] = left;
            out.push_back(TypeClass{cur});
            return;
        }
        for (std::uint32_t c = 0; c <= left; ++c) {
            cur[idx] = c;
            rec(idx + 1, left - c);
        }
    };
    rec(0, static_cast<std::uint32_t>(n));
    return out;
}

// Enumerate the members of a type class in lexicographic order; `visit` gets
// each word. Caller is responsible for keeping the class small.
inline void enumerate_members(const TypeClass& t,
                              const std::function<void(const std::vector<std::uint8_t>&)>& visit) {
    std::size_t n = t.n();
    std::vector<std::uint8_t> word(n);
    std::vector<std::uint32_t> left = t.counts;
    std::function<void(std::size_t)> rec = [&](std::size_t pos) {
        if (pos == n) {
            visit(word);
            return;
        }
        for (std::size_t a = 0; a < left.size(); ++a) {
            if (left[a] == 0) continue;
            --left[a];
            word[pos] = static_cast<std::uint8_t>(a);
            rec(pos + 1);
            ++left[a];
        }
    };
    rec(0);
}

// Uniform member of a type class (multiset shuffle).
inline std::vector<std::uint8_t> sample_member(const TypeClass& t, CounterRng& rng) {
    std::vector<std::uint8_t> word;
    word.reserve(t.n());
    for (std::size_t a = 0; a < t.counts.size(); ++a)
        word.insert(word.end(), t.counts[a], static_cast<std::uint8_t>(a));
    for (std::size_t i = word.size(); i > 1; --i)
        std::swap(word[i - 1], word[rng.next_below(i)]);
    return word;
}

// Memoized empirical lossy rates. One cache instance is tied to one
// distortion spec; keys are exact count vectors. Not thread-safe: workers own
// their own instance (values are pure functions of the key, so caches agree).
class RateCache {
  public:
    explicit RateCache(DistortionSpec spec, RDOptions opt = {})
        : spec_(std::move(spec)), opt_(opt) {}

    const DistortionSpec& spec() const { return spec_; }

    // Per-symbol rate R(Q_T, D); +infinity when the level is unreachable for
    // this empirical pmf (possible for general distortion matrices).
    double per_symbol(const TypeClass& t) {
        auto it = cache_.find(t);
        if (it != cache_.end()) {
            ++hits_;
            return it->second;
        }
        ++misses_;
        Pmf q = t.pmf();
        double r = spec_.min_expected(q) > spec_.level() + 1e-12
                       ? std::numeric_limits<double>::infinity()
                       : rate_distortion(q, spec_, opt_).rate;
        cache_.emplace(t, r);
        return r;
    }

    // Total empirical lossy rate n * R(Q_T, D) in bits.
    double total_bits(const TypeClass& t) { return static_cast<double>(t.n()) * per_symbol(t); }

    std::size_t hits() const { return hits_; }
    std::size_t misses() const { return misses_; }
    void clear() { cache_.clear(); hits_ = misses_ = 0; }

  private:
    DistortionSpec spec_;
    RDOptions opt_;
    std::unordered_map<TypeClass, double, TypeClassHash> cache_;
    std::size_t hits_ = 0;
    std::size_t misses_ = 0;
};

inline double empirical_lossy_rate(const TypeClass& t, RateCache& cache) {
    return cache.total_bits(t);
}

inline TypeClass extend(const TypeClass& t, std::size_t letter) {
    TypeClass e = t;
    ++e.counts[letter];
    return e;
}

// Largest total empirical lossy rate over the single-letter extensions.
inline double best_extension_bits(const TypeClass& t, RateCache& cache) {
    double best = 0.0;
    for (std::size_t a = 0; a < t.counts.size(); ++a)
        best = std::max(best, cache.total_bits(extend(t, a)));
    return best;
}

// A type is transitional iff its own total rate is within the threshold and
// some single-letter extension exceeds it. The sequence-level existential
// reduces to this type-level check because the extended empirical pmf depends
// only on (counts, letter).
inline bool is_transitional(const TypeClass& t, double gamma, RateCache& cache) {
    if (gamma < 0.0) throw ConfigError("is_transitional: gamma must be >= 0");
    if (cache.total_bits(t) > gamma) return false;
    for (std::size_t a = 0; a < t.counts.size(); ++a)
        if (cache.total_bits(extend(t, a)) > gamma) return true;
    return false;
}

struct TransitionalSet {
    std::vector<TypeClass> members;  // ascending lexicographic order
    std::size_t n = 0;
    double gamma = 0.0;
    double count_reference = 0.0;  // n^(|alphabet|-2), logged as a diagnostic
};

inline TransitionalSet transitional_set(std::size_t n, double gamma, RateCache& cache) {
    TransitionalSet out;
    out.n = n;
    out.gamma = gamma;
    std::size_t k = cache.spec().source_size();
    out.count_reference = std::pow(static_cast<double>(n), static_cast<double>(k) - 2.0);
    for (auto& t : enumerate_types(n, k))
        if (is_transitional(t, gamma, cache)) out.members.push_back(t);
    return out;
}

}  // namespace vflossy
