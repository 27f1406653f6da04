#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "vflossy/common.hpp"
#include "vflossy/pmf.hpp"
#include "vflossy/rd.hpp"
#include "vflossy/rng.hpp"
#include "vflossy/types.hpp"

namespace vflossy {

using Word = std::vector<std::uint8_t>;

inline std::int64_t distortion_total(const Word& x, const Word& y, const DistortionSpec& spec) {
    std::int64_t s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += spec.grid(x[i], y[i]);
    return s;
}

inline bool within_level(const Word& x, const Word& y, const DistortionSpec& spec) {
    return spec.within_budget(distortion_total(x, y, spec), x.size());
}

struct Covering {
    enum class Method { ExactGreedy, RandomizedAugmented, Structured };

    TypeClass type;
    std::vector<Word> codewords;
    Method method = Method::ExactGreedy;

    // Randomized-path bookkeeping.
    std::uint64_t draws = 0;
    std::uint64_t augmented = 0;
    double pre_augment_coverage = 1.0;
    bool verified_complete = false;  // true when completeness was checked member-by-member
};

struct CoverOptions {
    double upsilon = 4.0;
    int crossover_n = 8;                    // exact greedy below this blocklength
    std::uint64_t greedy_member_cap = 100000;
    std::uint64_t greedy_candidate_cap = 65536;
    int greedy_max_n = 16;
    std::uint64_t exhaustive_cap = std::uint64_t{1} << 18;  // member-tracking limit
    std::uint64_t draw_cap = std::uint64_t{1} << 22;
    int structured_max_deficit = 2;
    std::uint64_t sample_size = 20000;      // sampled-mode training/verification sample
    int sample_rounds = 4;
    std::uint64_t codeword_cap = std::uint64_t{1} << 22;
};

namespace detail {

inline unsigned bits_per_symbol(std::size_t alphabet) {
    unsigned b = 1;
    while ((std::size_t{1} << b) < alphabet) ++b;
    return b;
}

inline bool packable(std::size_t n, std::size_t alphabet) {
    return static_cast<std::size_t>(bits_per_symbol(alphabet)) * n <= 64;
}

inline std::uint64_t pack_word(const Word& w, unsigned bps) {
    std::uint64_t v = 0;
    for (auto s : w) v = (v << bps) | s;
    return v;
}

inline Word unpack_word(std::uint64_t v, std::size_t n, unsigned bps) {
    Word w(n);
    std::uint64_t mask = (std::uint64_t{1} << bps) - 1;
    for (std::size_t i = n; i-- > 0;) {
        w[i] = static_cast<std::uint8_t>(v & mask);
        v >>= bps;
    }
    return w;
}

// Reproduction word that applies the per-letter minimum-distortion map.
inline Word canonical_repair(const Word& x, const DistortionSpec& spec) {
    Word y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        std::size_t best = 0;
        std::int64_t bv = spec.grid(x[i], 0);
        for (std::size_t c = 1; c < spec.repro_size(); ++c) {
            std::int64_t v = spec.grid(x[i], c);
            if (v < bv) { bv = v; best = c; }
        }
        y[i] = static_cast<std::uint8_t>(best);
    }
    return y;
}

inline Word draw_word(const Pmf& q, std::size_t n, CounterRng& rng) {
    Word w(n);
    for (std::size_t i = 0; i < n; ++i) {
        double u = rng.next_double();
        double acc = 0.0;
        std::uint8_t pick = static_cast<std::uint8_t>(q.size() - 1);
        for (std::size_t y = 0; y < q.size(); ++y) {
            acc += q[y];
            if (u < acc) { pick = static_cast<std::uint8_t>(y); break; }
        }
        w[i] = pick;
    }
    return w;
}

}  // namespace detail

// Greedy set cover over the full candidate space. Guaranteed complete; size
// within a ln|T|+1 factor of the optimum.
inline Covering cover_exact(const TypeClass& t, const DistortionSpec& spec,
                            const CoverOptions& opts = {}) {
    std::size_t n = t.n();
    std::size_t ny = spec.repro_size();
    if (n > static_cast<std::size_t>(opts.greedy_max_n))
        throw ConfigError("cover_exact: blocklength " + std::to_string(n) +
                          " exceeds the exact-greedy cap; use cover_randomized");
    double cand_log2 = static_cast<double>(n) * std::log2(static_cast<double>(ny));
    if (cand_log2 > std::log2(static_cast<double>(opts.greedy_candidate_cap)) + 1e-9)
        throw ConfigError("cover_exact: candidate space too large; use cover_randomized");
    if (t.size_log2() > std::log2(static_cast<double>(opts.greedy_member_cap)) + 1e-9)
        throw ConfigError("cover_exact: type class too large; use cover_randomized");

    std::vector<Word> members;
    enumerate_members(t, [&](const Word& w) { members.push_back(w); });

    std::uint64_t cand_count = 1;
    for (std::size_t i = 0; i < n; ++i) cand_count *= ny;

    std::vector<char> covered(members.size(), 0);
    std::size_t remaining = members.size();
    const std::int64_t budget = spec.budget(n);

    Covering out;
    out.type = t;
    out.method = Covering::Method::ExactGreedy;
    Word cand(n);
    while (remaining > 0) {
        std::uint64_t best_c = 0;
        std::size_t best_gain = 0;
        for (std::uint64_t c = 0; c < cand_count; ++c) {
            std::uint64_t v = c;
            for (std::size_t i = n; i-- > 0;) {
                cand[i] = static_cast<std::uint8_t>(v % ny);
                v /= ny;
            }
            std::size_t gain = 0;
            for (std::size_t m = 0; m < members.size(); ++m) {
                if (covered[m]) continue;
                std::int64_t d = 0;
                bool ok = true;
                for (std::size_t i = 0; i < n; ++i) {
                    d += spec.grid(members[m][i], cand[i]);
                    if (d > budget) { ok = false; break; }
                }
                if (ok) ++gain;
            }
            if (gain > best_gain) {
                best_gain = gain;
                best_c = c;
            }
        }
        if (best_gain == 0)
            throw IntegrityError("cover_exact: no candidate makes progress (infeasible level?)");
        std::uint64_t v = best_c;
        for (std::size_t i = n; i-- > 0;) {
            cand[i] = static_cast<std::uint8_t>(v % ny);
            v /= ny;
        }
        out.codewords.push_back(cand);
        for (std::size_t m = 0; m < members.size(); ++m) {
            if (covered[m]) continue;
            if (distortion_total(members[m], cand, spec) <= budget) {
                covered[m] = 1;
                --remaining;
            }
        }
    }
    out.verified_complete = true;
    return out;
}

// Structured covering for binary alphabets under a (scaled) Hamming
// distortion. Members of the class have `cm` minority letters; the distortion
// budget pays for all but j of them, so a codeword that plants j minority
// letters inside the member's minority support is within the level. A word
// family whose j-subsets hit every cm-subset of positions (pigeonhole over
// contiguous parts) therefore covers the class exactly, at any blocklength.
inline Covering cover_structured_hamming(const TypeClass& t, const DistortionSpec& spec,
                                         const CoverOptions& opts = {}) {
    if (!spec.is_scaled_hamming() || t.counts.size() != 2 || spec.repro_size() != 2)
        throw ConfigError("cover_structured_hamming: needs a binary scaled-Hamming spec");
    std::size_t n = t.n();
    const std::int64_t unit = spec.grid(0, 1);
    const std::int64_t budget = spec.budget(n);
    const std::int64_t r = budget / unit;  // affordable letter flips

    std::uint8_t minority = t.counts[1] <= t.counts[0] ? 1 : 0;
    std::uint8_t majority = 1 - minority;
    std::int64_t cm = t.counts[minority];
    std::int64_t j = cm - r;

    Covering out;
    out.type = t;
    out.method = Covering::Method::Structured;
    out.verified_complete = true;

    if (j <= 0) {
        out.codewords.push_back(Word(n, majority));
        return out;
    }
    if (j == cm && r == 0) {
        // Zero radius: the class itself is the only complete covering.
        if (t.size_log2() > std::log2(static_cast<double>(opts.codeword_cap)))
            throw ConfigError("cover_structured_hamming: zero-radius covering of a large class");
        enumerate_members(t, [&](const Word& w) { out.codewords.push_back(w); });
        return out;
    }

    if (j == 1) {
        // Any cm-subset of positions meets the first n-cm+1 of them.
        for (std::size_t i = 0; i + static_cast<std::size_t>(cm) <= n; ++i) {
            Word w(n, majority);
            w[i] = minority;
            out.codewords.push_back(w);
        }
        return out;
    }

    // Pigeonhole: split positions into floor(cm/j) parts; every cm-subset has
    // >= j elements in some part. Emit all j-subsets within each part.
    std::size_t parts = static_cast<std::size_t>(cm / j);
    std::size_t base = n / parts, rem = n % parts;
    std::size_t pos = 0;
    for (std::size_t p = 0; p < parts; ++p) {
        std::size_t size = base + (p < rem ? 1 : 0);
        std::vector<std::size_t> idx(static_cast<std::size_t>(j));
        for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
        while (true) {
            Word w(n, majority);
            for (auto k : idx) w[pos + k] = minority;
            out.codewords.push_back(w);
            if (out.codewords.size() > opts.codeword_cap)
                throw ConfigError("cover_structured_hamming: codeword count exceeds cap");
            // next j-combination of {0..size-1}
            std::size_t i = idx.size();
            while (i > 0 && idx[i - 1] == size - idx.size() + i - 1) --i;
            if (i == 0) break;
            ++idx[i - 1];
            for (std::size_t k = i; k < idx.size(); ++k) idx[k] = idx[k - 1] + 1;
        }
        pos += size;
    }
    return out;
}

// Randomized covering: candidates drawn i.i.d. from the optimal reproduction
// marginal of the type's pmf, kept when they cover something new, then
// augmented with per-letter repairs of whatever remains uncovered so the
// covering invariant holds unconditionally. Draw count never exceeds the
// 2^(nR + upsilon*log2 n) budget of the covering lemma (nor the memory cap).
inline Covering cover_randomized(const TypeClass& t, const DistortionSpec& spec, double upsilon,
                                 std::uint64_t seed, const CoverOptions& opts = {}) {
    std::size_t n = t.n();
    if (n < 2) throw ConfigError("cover_randomized: needs blocklength >= 2");
    RDResult rd = rate_distortion(t.pmf(), spec);
    Pmf qstar = rd.output_dist;
    double rate_bits = static_cast<double>(n) * rd.rate;

    double budget_log2 = rate_bits + upsilon * std::log2(static_cast<double>(n));
    std::uint64_t draw_budget =
        budget_log2 >= 62.0 ? opts.draw_cap
                            : std::min<std::uint64_t>(
                                  opts.draw_cap,
                                  static_cast<std::uint64_t>(std::ceil(std::exp2(budget_log2))));
    draw_budget = std::max<std::uint64_t>(draw_budget, 64);

    Covering out;
    out.type = t;
    out.method = Covering::Method::RandomizedAugmented;

    const std::int64_t budget = spec.budget(n);
    const bool exhaustive = detail::packable(n, spec.repro_size()) &&
                            t.size_log2() <= std::log2(static_cast<double>(opts.exhaustive_cap));
    const unsigned bps = detail::bits_per_symbol(spec.repro_size());

    std::vector<Word> tracked;  // members whose coverage we track
    if (exhaustive) {
        enumerate_members(t, [&](const Word& w) { tracked.push_back(w); });
    } else {
        for (std::uint64_t i = 0; i < opts.sample_size; ++i) {
            CounterRng rng(CounterRng::mix(seed, 0xABCD0001u), i);
            tracked.push_back(sample_member(t, rng));
        }
    }

    std::vector<std::uint32_t> uncovered(tracked.size());
    for (std::size_t i = 0; i < tracked.size(); ++i) uncovered[i] = static_cast<std::uint32_t>(i);

    std::unordered_set<std::uint64_t> kept_packed;
    std::vector<Word> batch;
    std::uint64_t draws = 0;
    const std::size_t batch_size = 64;
    while (!uncovered.empty() && draws < draw_budget) {
        batch.clear();
        for (std::size_t b = 0; b < batch_size && draws < draw_budget; ++b, ++draws) {
            CounterRng rng(CounterRng::mix(seed, 0xABCD0002u), draws);
            batch.push_back(detail::draw_word(qstar, n, rng));
        }
        std::vector<char> useful(batch.size(), 0);
        std::vector<std::uint32_t> still;
        still.reserve(uncovered.size());
        for (auto mi : uncovered) {
            bool hit = false;
            for (std::size_t b = 0; b < batch.size(); ++b) {
                if (distortion_total(tracked[mi], batch[b], spec) <= budget) {
                    useful[b] = 1;
                    hit = true;
                    break;
                }
            }
            if (!hit) still.push_back(mi);
        }
        for (std::size_t b = 0; b < batch.size(); ++b) {
            if (!useful[b]) continue;
            bool fresh = true;
            if (detail::packable(n, spec.repro_size()))
                fresh = kept_packed.insert(detail::pack_word(batch[b], bps)).second;
            if (fresh) out.codewords.push_back(batch[b]);
        }
        uncovered = std::move(still);
    }
    out.draws = draws;
    out.pre_augment_coverage =
        tracked.empty() ? 1.0
                        : 1.0 - static_cast<double>(uncovered.size()) /
                                    static_cast<double>(tracked.size());

    auto augment_with = [&](const Word& w) {
        Word fix = detail::canonical_repair(w, spec);
        if (distortion_total(w, fix, spec) > budget)
            throw IntegrityError("cover_randomized: repair word exceeds the distortion level");
        bool fresh = true;
        if (detail::packable(n, spec.repro_size()))
            fresh = kept_packed.insert(detail::pack_word(fix, bps)).second;
        if (fresh) {
            out.codewords.push_back(fix);
            ++out.augmented;
        }
    };

    for (auto mi : uncovered) augment_with(tracked[mi]);

    if (exhaustive) {
        out.verified_complete = true;
    } else {
        // Fresh-sample sweeps: repair anything found uncovered, finish on a
        // clean round. Completeness beyond the swept samples is statistical.
        for (int round = 0; round < opts.sample_rounds; ++round) {
            std::uint64_t misses = 0;
            for (std::uint64_t i = 0; i < opts.sample_size; ++i) {
                CounterRng rng(CounterRng::mix(seed, 0xABCD0100u + round), i);
                Word w = sample_member(t, rng);
                bool hit = false;
                for (const auto& c : out.codewords)
                    if (distortion_total(w, c, spec) <= budget) { hit = true; break; }
                if (!hit) {
                    augment_with(w);
                    ++misses;
                }
            }
            if (misses == 0 && round > 0) break;
        }
        out.verified_complete = false;
    }
    if (out.codewords.size() > opts.codeword_cap)
        throw ConfigError("cover_randomized: covering exceeds the codeword cap");
    return out;
}

struct CoverReport {
    double per_symbol_rate = 0.0;
    double lemma_budget = 0.0;
    double slack = 0.0;
};

inline CoverReport covering_rate_report(const Covering& c, RateCache& cache, double upsilon) {
    CoverReport r;
    double n = static_cast<double>(c.type.n());
    r.per_symbol_rate = std::log2(static_cast<double>(c.codewords.size())) / n;
    r.lemma_budget = cache.per_symbol(c.type) + upsilon * std::log2(n) / n;
    r.slack = r.lemma_budget - r.per_symbol_rate;
    return r;
}

struct VerifyReport {
    bool exhaustive = false;
    std::uint64_t checked = 0;
    std::uint64_t misses = 0;
};

// Membership check of the covering invariant: exhaustively when the class is
// small enough, by uniform sampling otherwise.
inline VerifyReport verify_covering(const Covering& c, const DistortionSpec& spec,
                                    std::uint64_t exhaustive_cap, std::uint64_t samples,
                                    std::uint64_t seed) {
    VerifyReport rep;
    const std::int64_t budget = spec.budget(c.type.n());
    auto covered = [&](const Word& w) {
        for (const auto& cw : c.codewords)
            if (distortion_total(w, cw, spec) <= budget) return true;
        return false;
    };
    if (c.type.size_log2() <= std::log2(static_cast<double>(exhaustive_cap))) {
        rep.exhaustive = true;
        enumerate_members(c.type, [&](const Word& w) {
            ++rep.checked;
            if (!covered(w)) ++rep.misses;
        });
    } else {
        for (std::uint64_t i = 0; i < samples; ++i) {
            CounterRng rng(CounterRng::mix(seed, 0xF00D), i);
            ++rep.checked;
            if (!covered(sample_member(c.type, rng))) ++rep.misses;
        }
    }
    return rep;
}

// Build policy used by the dictionary: structural single-word covers for
// zero-rate classes, exact greedy at short blocklengths, randomized with full
// member tracking while the class fits in memory, the structured family for
// large binary-Hamming classes with a small deficit, sampled randomized
// otherwise.
inline Covering choose_cover(const TypeClass& t, RateCache& cache, double upsilon,
                             std::uint64_t seed, const CoverOptions& opts = {}) {
    const DistortionSpec& spec = cache.spec();
    std::size_t n = t.n();

    if (cache.per_symbol(t) == 0.0) {
        std::size_t y = spec.best_single_letter(t.pmf());
        std::int64_t total = 0;
        for (std::size_t a = 0; a < t.counts.size(); ++a)
            total += static_cast<std::int64_t>(t.counts[a]) * spec.grid(a, y);
        if (spec.within_budget(total, n)) {
            Covering out;
            out.type = t;
            out.method = Covering::Method::Structured;
            out.verified_complete = true;
            out.codewords.push_back(Word(n, static_cast<std::uint8_t>(y)));
            return out;
        }
    }

    bool greedy_ok =
        n < static_cast<std::size_t>(opts.crossover_n) &&
        n <= static_cast<std::size_t>(opts.greedy_max_n) &&
        static_cast<double>(n) * std::log2(static_cast<double>(spec.repro_size())) <=
            std::log2(static_cast<double>(opts.greedy_candidate_cap)) + 1e-9 &&
        t.size_log2() <= std::log2(static_cast<double>(opts.greedy_member_cap)) + 1e-9;
    if (greedy_ok) return cover_exact(t, spec, opts);

    bool exhaustive_ok = detail::packable(n, spec.repro_size()) &&
                         t.size_log2() <= std::log2(static_cast<double>(opts.exhaustive_cap));
    if (exhaustive_ok) return cover_randomized(t, spec, upsilon, seed, opts);

    if (spec.is_scaled_hamming() && t.counts.size() == 2) {
        const std::int64_t unit = spec.grid(0, 1);
        std::int64_t r = spec.budget(n) / unit;
        std::int64_t cm = std::min(t.counts[0], t.counts[1]);
        std::int64_t deficit = cm - r;
        if (deficit <= opts.structured_max_deficit)
            return cover_structured_hamming(t, spec, opts);
    }
    return cover_randomized(t, spec, upsilon, seed, opts);
}

}  // namespace vflossy
