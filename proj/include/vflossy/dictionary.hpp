#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "vflossy/common.hpp"
#include "vflossy/covering.hpp"
#include "vflossy/pmf.hpp"
#include "vflossy/types.hpp"

namespace vflossy {

inline std::uint32_t crc32_ieee(const std::uint8_t* data, std::size_t len,
                                std::uint32_t crc = 0) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    crc ^= 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

struct DictionaryEntry {
    std::uint16_t n = 0;
    TypeClass type;
    Word codeword;
};

struct BuildOptions {
    double upsilon = 4.0;
    std::uint64_t seed = 1;
    double r_min = 0.06;  // lower bound on per-symbol rate; scan cap = ceil((4/r_min)*gamma)
    CoverOptions cover;

    double scan_cap_factor() const { return 4.0 / r_min; }
};

struct LengthAccount {
    std::uint32_t n = 0;
    std::uint64_t transitional_count = 0;  // |A_n|
    std::uint64_t codewords = 0;           // N_n
};

// The assembled parsing codebook. Entries are ordered by (blocklength,
// type counts lex, codeword order within the covering) and indexed densely.
class Dictionary {
  public:
    double gamma = 0.0;
    DistortionSpec spec;
    double upsilon = 4.0;
    std::uint64_t budget = 0;  // user budget M
    std::uint64_t seed = 1;
    double r_min = 0.06;
    std::uint32_t scan_cap = 0;
    std::uint32_t index_width = 0;
    std::vector<DictionaryEntry> entries;
    std::vector<LengthAccount> accounts;
    bool truncated_at_cap = false;  // transitional types exist at the top of the scan range

    std::uint64_t size() const { return entries.size(); }
    std::uint32_t max_blocklength() const {
        std::uint32_t m = 0;
        for (const auto& e : entries) m = std::max(m, static_cast<std::uint32_t>(e.n));
        return m;
    }

    // Index range [first, last) of the covering for (n, counts); nullopt when
    // the type is not in the dictionary.
    std::optional<std::pair<std::uint64_t, std::uint64_t>> covering_range(
        const TypeClass& t) const {
        auto it = lookup_.find(t);
        if (it == lookup_.end()) return std::nullopt;
        return it->second;
    }

    const Word& codeword(std::uint64_t index) const { return entries[index].codeword; }

    void rebuild_lookup() {
        lookup_.clear();
        std::uint64_t i = 0;
        while (i < entries.size()) {
            std::uint64_t j = i;
            while (j < entries.size() && entries[j].type == entries[i].type &&
                   entries[j].n == entries[i].n)
                ++j;
            lookup_.emplace(entries[i].type, std::make_pair(i, j));
            i = j;
        }
    }

  private:
    std::unordered_map<TypeClass, std::pair<std::uint64_t, std::uint64_t>, TypeClassHash> lookup_;
};

namespace detail {

// Shared covering cache across the gamma search: coverings depend only on the
// type (plus spec/seed/options), not on gamma.
struct CoverSizeCache {
    std::unordered_map<TypeClass, std::uint64_t, TypeClassHash> sizes;
    std::unordered_map<TypeClass, Covering, TypeClassHash> built;
};

inline const Covering& covering_for(const TypeClass& t, RateCache& cache,
                                    const BuildOptions& opt, CoverSizeCache& cc) {
    auto it = cc.built.find(t);
    if (it != cc.built.end()) return it->second;
    std::uint64_t type_seed = CounterRng::mix(opt.seed, TypeClassHash{}(t));
    Covering c = choose_cover(t, cache, opt.upsilon, type_seed, opt.cover);
    auto [ins, ok] = cc.built.emplace(t, std::move(c));
    cc.sizes[t] = ins->second.codewords.size();
    return ins->second;
}

}  // namespace detail

struct SizeProbe {
    std::uint64_t size = 0;
    bool truncated = false;
    bool saturated = false;  // counting stopped once the size passed `limit`
};

// Number of codewords the dictionary at threshold `gamma` would hold.
// Counting stops once `limit` is passed (the gamma search only needs to know
// a probe exceeded the budget), so saturated probes report a lower bound.
inline SizeProbe dictionary_size(double gamma, RateCache& cache, const BuildOptions& opt,
                                 detail::CoverSizeCache& cc,
                                 std::uint64_t limit = std::numeric_limits<std::uint64_t>::max()) {
    SizeProbe probe;
    auto scan_cap = static_cast<std::uint32_t>(
        std::max(1.0, std::ceil(opt.scan_cap_factor() * std::max(gamma, 0.0))));
    for (std::uint32_t n = 1; n <= scan_cap; ++n) {
        auto ts = transitional_set(n, gamma, cache);
        if (!ts.members.empty() && n == scan_cap) probe.truncated = true;
        for (const auto& t : ts.members) {
            auto it = cc.sizes.find(t);
            if (it == cc.sizes.end()) {
                detail::covering_for(t, cache, opt, cc);
                it = cc.sizes.find(t);
            }
            probe.size += it->second;
            if (probe.size > limit) {
                probe.saturated = true;
                return probe;
            }
        }
    }
    return probe;
}

inline Dictionary build_dictionary(double gamma, RateCache& cache, std::uint64_t budget_m,
                                   const BuildOptions& opt, detail::CoverSizeCache* shared = nullptr) {
    if (!(gamma >= 0.0)) throw ConfigError("build_dictionary: gamma must be >= 0");
    if (budget_m < 2) throw ConfigError("build_dictionary: budget M must be >= 2");

    detail::CoverSizeCache local;
    detail::CoverSizeCache& cc = shared ? *shared : local;

    Dictionary d;
    d.gamma = gamma;
    d.spec = cache.spec();
    d.upsilon = opt.upsilon;
    d.budget = budget_m;
    d.seed = opt.seed;
    d.r_min = opt.r_min;
    d.scan_cap = static_cast<std::uint32_t>(
        std::max(1.0, std::ceil(opt.scan_cap_factor() * std::max(gamma, 0.0))));
    d.index_width =
        static_cast<std::uint32_t>(std::ceil(std::log2(static_cast<double>(budget_m))));

    for (std::uint32_t n = 1; n <= d.scan_cap; ++n) {
        auto ts = transitional_set(n, gamma, cache);
        if (!ts.members.empty() && n == d.scan_cap) d.truncated_at_cap = true;
        LengthAccount acct;
        acct.n = n;
        acct.transitional_count = ts.members.size();
        for (const auto& t : ts.members) {
            const Covering& c = detail::covering_for(t, cache, opt, cc);
            for (const auto& w : c.codewords)
                d.entries.push_back({static_cast<std::uint16_t>(n), t, w});
            acct.codewords += c.codewords.size();
        }
        if (acct.transitional_count > 0) d.accounts.push_back(acct);
        if (d.entries.size() > budget_m)
            throw ConfigError("build_dictionary: size exceeds budget M at gamma=" +
                              std::to_string(gamma) + "; lower gamma");
    }
    d.rebuild_lookup();
    return d;
}

// Threshold suggested by the size-accounting chain:
// log2 M - (upsilon + |X| - 1) log2 log2 M - C. Reported for comparison; it
// goes negative at desk-scale budgets, which is why the search below is the
// operational definition.
inline double gamma_size_estimate(std::uint64_t budget_m, std::size_t alphabet, double upsilon,
                                  double c = 1.0) {
    double log2m = std::log2(static_cast<double>(budget_m));
    return log2m - (upsilon + static_cast<double>(alphabet) - 1.0) * std::log2(log2m) - c;
}

struct GammaSearch {
    double gamma = 0.0;
    double closed_form = 0.0;  // gamma_size_estimate for the same inputs
    std::vector<std::pair<double, std::uint64_t>> trace;  // (gamma, size) probes in search order
};

// Largest threshold (1e-3 resolution) whose dictionary fits the budget.
// Dictionary size is non-decreasing in the threshold; every probe lands in
// the trace so the monotonicity can be audited (probes beyond the budget are
// reported saturated at M+1).
inline GammaSearch choose_gamma(std::uint64_t budget_m, RateCache& cache, const BuildOptions& opt,
                                double closed_form_c = 1.0,
                                detail::CoverSizeCache* shared = nullptr) {
    if (budget_m < 2) throw ConfigError("choose_gamma: budget M must be >= 2");
    detail::CoverSizeCache local;
    detail::CoverSizeCache& cc = shared ? *shared : local;

    GammaSearch out;
    out.closed_form =
        gamma_size_estimate(budget_m, cache.spec().source_size(), opt.upsilon, closed_form_c);

    auto probe = [&](double g) {
        std::uint64_t s = dictionary_size(g, cache, opt, cc, budget_m).size;
        out.trace.emplace_back(g, std::min(s, budget_m + 1));
        return s;
    };

    if (probe(0.0) > budget_m)
        throw ConfigError("choose_gamma: budget M too small for this alphabet (even gamma -> 0 "
                          "exceeds it)");
    double lo = 0.0, hi = 0.5;
    bool bracketed = false;
    for (int g = 0; g < 24; ++g) {
        if (probe(hi) > budget_m) { bracketed = true; break; }
        lo = hi;
        hi *= 2.0;
        if (hi > 64.0) break;
    }
    if (!bracketed) {
        out.gamma = hi / 2.0;
        return out;  // budget so large the search saturated; caller sees the trace
    }
    while (hi - lo > 1e-3) {
        double mid = 0.5 * (lo + hi);
        if (probe(mid) <= budget_m) lo = mid; else hi = mid;
    }
    out.gamma = lo;
    return out;
}

// --- serialization ---------------------------------------------------------
//
// Format: magic "VFLD", version u16, header, entries, trailing CRC32 of all
// preceding bytes. Little-endian throughout; codewords are packed at
// ceil(log2 |reproduction alphabet|) bits per symbol, most significant bit
// first within each byte.

namespace detail {

struct ByteSink {
    std::vector<std::uint8_t> bytes;
    template <typename T>
    void put(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i)
            bytes.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
    }
    void put_f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        put<std::uint64_t>(bits);
    }
};

struct ByteSource {
    const std::vector<std::uint8_t>& bytes;
    std::size_t pos = 0;
    template <typename T>
    T get() {
        if (pos + sizeof(T) > bytes.size()) throw IoError("dictionary file truncated");
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            v |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
        pos += sizeof(T);
        return static_cast<T>(v);
    }
    double get_f64() {
        auto bits = get<std::uint64_t>();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
};

}  // namespace detail

inline std::vector<std::uint8_t> serialize(const Dictionary& d) {
    detail::ByteSink s;
    s.bytes.insert(s.bytes.end(), {'V', 'F', 'L', 'D'});
    s.put<std::uint16_t>(1);  // version
    auto nx = static_cast<std::uint16_t>(d.spec.source_size());
    auto ny = static_cast<std::uint16_t>(d.spec.repro_size());
    s.put(nx);
    s.put(ny);
    Rational lv = d.spec.level_rational();
    s.put<std::int64_t>(lv.num);
    s.put<std::int64_t>(lv.den);
    s.put_f64(d.gamma);
    s.put_f64(d.upsilon);
    s.put<std::uint64_t>(d.budget);
    s.put<std::uint64_t>(d.entries.size());
    s.put<std::uint64_t>(d.seed);
    s.put_f64(d.r_min);
    s.put<std::uint32_t>(d.scan_cap);
    s.put<std::uint32_t>(d.index_width);
    s.put<std::uint8_t>(d.truncated_at_cap ? 1 : 0);
    s.put<std::int64_t>(d.spec.grid_den());
    for (std::size_t x = 0; x < nx; ++x)
        for (std::size_t y = 0; y < ny; ++y) s.put<std::int64_t>(d.spec.grid(x, y));

    unsigned bps = detail::bits_per_symbol(ny);
    for (const auto& e : d.entries) {
        s.put<std::uint16_t>(e.n);
        for (auto c : e.type.counts) s.put<std::uint32_t>(c);
        std::uint8_t acc = 0;
        int fill = 0;
        for (auto sym : e.codeword) {
            for (int b = static_cast<int>(bps) - 1; b >= 0; --b) {
                acc = static_cast<std::uint8_t>((acc << 1) | ((sym >> b) & 1));
                if (++fill == 8) {
                    s.bytes.push_back(acc);
                    acc = 0;
                    fill = 0;
                }
            }
        }
        if (fill > 0) s.bytes.push_back(static_cast<std::uint8_t>(acc << (8 - fill)));
    }
    std::uint32_t crc = crc32_ieee(s.bytes.data(), s.bytes.size());
    s.put<std::uint32_t>(crc);
    return std::move(s.bytes);
}

inline std::uint32_t dictionary_crc(const Dictionary& d) {
    auto bytes = serialize(d);
    std::uint32_t crc = 0;
    std::memcpy(&crc, bytes.data() + bytes.size() - 4, 4);
    return crc;
}

inline Dictionary deserialize(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 10 || bytes[0] != 'V' || bytes[1] != 'F' || bytes[2] != 'L' ||
        bytes[3] != 'D')
        throw IoError("dictionary file: bad magic");
    std::uint32_t stored = 0;
    std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
    if (crc32_ieee(bytes.data(), bytes.size() - 4) != stored)
        throw IoError("dictionary file: checksum mismatch");

    detail::ByteSource src{bytes, 4};
    auto version = src.get<std::uint16_t>();
    if (version != 1) throw IoError("dictionary file: unsupported version");
    auto nx = src.get<std::uint16_t>();
    auto ny = src.get<std::uint16_t>();
    auto lnum = src.get<std::int64_t>();
    auto lden = src.get<std::int64_t>();

    Dictionary d;
    d.gamma = src.get_f64();
    d.upsilon = src.get_f64();
    d.budget = src.get<std::uint64_t>();
    auto m_actual = src.get<std::uint64_t>();
    d.seed = src.get<std::uint64_t>();
    d.r_min = src.get_f64();
    d.scan_cap = src.get<std::uint32_t>();
    d.index_width = src.get<std::uint32_t>();
    d.truncated_at_cap = src.get<std::uint8_t>() != 0;
    auto den = src.get<std::int64_t>();
    std::vector<double> mat(static_cast<std::size_t>(nx) * ny);
    for (auto& v : mat)
        v = static_cast<double>(src.get<std::int64_t>()) / static_cast<double>(den);
    d.spec = DistortionSpec(nx, ny, std::move(mat),
                            static_cast<double>(lnum) / static_cast<double>(lden));

    unsigned bps = detail::bits_per_symbol(ny);
    d.entries.resize(m_actual);
    for (auto& e : d.entries) {
        e.n = src.get<std::uint16_t>();
        e.type.counts.resize(nx);
        for (auto& c : e.type.counts) c = src.get<std::uint32_t>();
        e.codeword.resize(e.n);
        std::size_t nbits = static_cast<std::size_t>(e.n) * bps;
        std::size_t nbytes = (nbits + 7) / 8;
        if (src.pos + nbytes > bytes.size()) throw IoError("dictionary file truncated");
        std::size_t bit = 0;
        for (std::size_t i = 0; i < e.n; ++i) {
            std::uint8_t sym = 0;
            for (unsigned b = 0; b < bps; ++b, ++bit)
                sym = static_cast<std::uint8_t>(
                    (sym << 1) | ((bytes[src.pos + bit / 8] >> (7 - bit % 8)) & 1));
            e.codeword[i] = sym;
        }
        src.pos += nbytes;
    }
    if (src.pos != bytes.size() - 4) throw IoError("dictionary file: trailing garbage");
    d.rebuild_lookup();
    return d;
}

inline void save_dictionary(const Dictionary& d, const std::string& path) {
    auto bytes = serialize(d);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path);
}

inline Dictionary load_dictionary(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

}  // namespace vflossy
