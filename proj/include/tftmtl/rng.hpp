#pragma once
#include <cstdint>
#include <random>

namespace tftmtl {

/// splitmix64 mixer; used to derive independent substream seeds from one
/// user-facing seed so that components (init, shuffle, dropout, generator
/// products) do not share a stream.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return mix_seed(base + 0x517cc1b727220a95ull * (stream + 1));
}

inline std::mt19937_64 make_rng(std::uint64_t base, std::uint64_t stream) {
    return std::mt19937_64(derive_seed(base, stream));
}

}  // namespace tftmtl
