#pragma once

#include <cstdint>
#include <random>

namespace pathkernel::detail {

// std::uniform_*_distribution output is implementation-defined; these helpers
// keep seeded streams identical across standard libraries.

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Unbiased integer in [0, n) by rejection.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r = rng();
    while (r >= limit) r = rng();
    return r % n;
}

}  // namespace pathkernel::detail
