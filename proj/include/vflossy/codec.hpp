#pragma once

#include <cstdint>
#include <functional>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "vflossy/common.hpp"
#include "vflossy/dictionary.hpp"

namespace vflossy {

struct ParseResult {
    std::uint32_t length = 0;          // parsed segment length
    std::uint64_t codeword_index = 0;  // dense index into the dictionary
    double distortion = 0.0;           // realized per-symbol distortion
    std::int64_t distortion_grid = 0;  // exact total on the distortion grid
};

// Supplies source symbols one at a time; empty optional means exhausted.
using SymbolSource = std::function<std::optional<std::uint8_t>()>;

// Reads symbols until the prefix's type first becomes transitional (that is,
// until the prefix has an entry in the dictionary), then returns the lowest-
// index codeword of that type's covering within the distortion level.
inline ParseResult parse_first(const Dictionary& d, const SymbolSource& next,
                               std::vector<std::uint8_t>* consumed = nullptr) {
    const std::size_t nx = d.spec.source_size();
    TypeClass t;
    t.counts.assign(nx, 0);
    Word prefix;
    prefix.reserve(64);
    for (std::uint32_t n = 1; n <= d.scan_cap; ++n) {
        auto sym = next();
        if (!sym.has_value())
            throw IoError("parse: stream exhausted after " + std::to_string(n - 1) +
                          " symbols, before any transitional type");
        if (*sym >= nx) throw ConfigError("parse: symbol out of alphabet range");
        prefix.push_back(*sym);
        ++t.counts[*sym];
        if (consumed) consumed->push_back(*sym);
        auto range = d.covering_range(t);
        if (!range) continue;
        for (std::uint64_t i = range->first; i < range->second; ++i) {
            std::int64_t total = distortion_total(prefix, d.codeword(i), d.spec);
            if (d.spec.within_budget(total, n)) {
                ParseResult res;
                res.length = n;
                res.codeword_index = i;
                res.distortion_grid = total;
                res.distortion = static_cast<double>(total) /
                                 (static_cast<double>(d.spec.grid_den()) * n);
                return res;
            }
        }
        throw IntegrityError("parse: prefix of type in the dictionary has no codeword within "
                             "the distortion level (covering violation)");
    }
    throw IntegrityError("parse: no transitional type within the dictionary blocklength range (" +
                         std::to_string(d.scan_cap) + ")");
}

struct BitWriter {
    std::vector<std::uint8_t> bytes;
    std::uint8_t acc = 0;
    int fill = 0;

    void put(std::uint64_t value, std::uint32_t width) {
        for (std::int32_t b = static_cast<std::int32_t>(width) - 1; b >= 0; --b) {
            acc = static_cast<std::uint8_t>((acc << 1) | ((value >> b) & 1));
            if (++fill == 8) {
                bytes.push_back(acc);
                acc = 0;
                fill = 0;
            }
        }
    }
    void flush() {
        if (fill > 0) {
            bytes.push_back(static_cast<std::uint8_t>(acc << (8 - fill)));
            acc = 0;
            fill = 0;
        }
    }
};

struct BitReader {
    const std::vector<std::uint8_t>& bytes;
    std::size_t bit = 0;

    std::uint64_t get(std::uint32_t width) {
        std::uint64_t v = 0;
        for (std::uint32_t i = 0; i < width; ++i, ++bit) {
            if (bit / 8 >= bytes.size()) throw IoError("bit stream truncated");
            v = (v << 1) | ((bytes[bit / 8] >> (7 - bit % 8)) & 1);
        }
        return v;
    }
};

struct EncodeResult {
    std::vector<std::uint8_t> bits;           // packed indices, index_width each, MSB first
    std::vector<std::uint32_t> boundaries;    // cumulative segment lengths
    std::vector<ParseResult> segments;
};

// Repeated one-shot parses; the rate tracker resets per segment.
inline EncodeResult encode_stream(const Dictionary& d, const SymbolSource& next,
                                  std::uint64_t count) {
    EncodeResult out;
    BitWriter w;
    std::uint32_t consumed = 0;
    for (std::uint64_t s = 0; s < count; ++s) {
        ParseResult r = parse_first(d, next);
        consumed += r.length;
        out.boundaries.push_back(consumed);
        out.segments.push_back(r);
        w.put(r.codeword_index, d.index_width);
    }
    w.flush();
    out.bits = std::move(w.bytes);
    return out;
}

// Maps packed indices back to codewords; concatenation is the reproduction.
inline std::vector<Word> decode(const Dictionary& d, const std::vector<std::uint8_t>& bits,
                                std::uint64_t count) {
    std::vector<Word> out;
    BitReader r{bits};
    for (std::uint64_t s = 0; s < count; ++s) {
        std::uint64_t idx = r.get(d.index_width);
        if (idx >= d.entries.size())
            throw IntegrityError("decode: index " + std::to_string(idx) +
                                 " out of range (dictionary holds " +
                                 std::to_string(d.entries.size()) + ")");
        out.push_back(d.codeword(idx));
    }
    return out;
}

// --- encoded stream file ----------------------------------------------------
// Header: dictionary CRC32 (u32 LE), index width (u32 LE), segment count
// (u64 LE); then the packed indices, big-endian bit order within bytes.

inline void save_encoded(const std::string& path, std::uint32_t dict_crc,
                         std::uint32_t index_width, std::uint64_t count,
                         const std::vector<std::uint8_t>& bits) {
    detail::ByteSink s;
    s.put<std::uint32_t>(dict_crc);
    s.put<std::uint32_t>(index_width);
    s.put<std::uint64_t>(count);
    s.bytes.insert(s.bytes.end(), bits.begin(), bits.end());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(s.bytes.data()),
            static_cast<std::streamsize>(s.bytes.size()));
    if (!f) throw IoError("write failed: " + path);
}

struct EncodedFile {
    std::uint32_t dict_crc = 0;
    std::uint32_t index_width = 0;
    std::uint64_t count = 0;
    std::vector<std::uint8_t> bits;
};

inline EncodedFile load_encoded(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    detail::ByteSource src{bytes, 0};
    EncodedFile out;
    out.dict_crc = src.get<std::uint32_t>();
    out.index_width = src.get<std::uint32_t>();
    out.count = src.get<std::uint64_t>();
    out.bits.assign(bytes.begin() + static_cast<std::ptrdiff_t>(src.pos), bytes.end());
    return out;
}

}  // namespace vflossy
