#pragma once

#include <cstdint>

namespace vflossy {

// Counter-based generator: every output is a pure function of
// (key, stream, counter), so trials can run on any thread schedule and still
// produce identical results. The mixer is splitmix64-style.
class CounterRng {
  public:
    CounterRng(std::uint64_t key, std::uint64_t stream) noexcept
        : key_(mix(key ^ 0x9e3779b97f4a7c15ull, stream)), counter_(0) {}

    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) noexcept {
        std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t next_u64() noexcept { return mix(key_, counter_++); }

    // Uniform in [0,1).
    double next_double() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [0, n).
    std::uint64_t next_below(std::uint64_t n) noexcept {
        // 128-bit multiply keeps the modulo bias negligible for n << 2^64.
        unsigned __int128 wide = static_cast<unsigned __int128>(next_u64()) * n;
        return static_cast<std::uint64_t>(wide >> 64);
    }

  private:
    std::uint64_t key_;
    std::uint64_t counter_;
};

}  // namespace vflossy
