#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sparce {

/// splitmix64 step; used as a mixing function for seed derivation.
inline std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t state, std::uint64_t value) {
    std::uint64_t x = state ^ (value + 0x9e3779b97f4a7c15ULL + (state << 6) + (state >> 2));
    return splitmix64(x);
}

inline std::uint64_t hash_string(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a 64
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Derives an independent sub-seed from a master seed and a named stream.
/// All randomness in an experiment flows through these streams, so any
/// component can be re-run in isolation with a reproducible seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream) {
    return hash_combine(master, hash_string(stream));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                                 std::uint64_t index) {
    return hash_combine(derive_seed(master, stream), index);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                                 std::uint64_t i, std::uint64_t j) {
    return hash_combine(derive_seed(master, stream, i), j);
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
    return std::mt19937_64(seed);
}

}  // namespace sparce
