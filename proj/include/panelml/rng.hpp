#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace panelml {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derive an independent engine from (root seed, stream name, index).
/// All randomness in the project flows through named substreams of one
/// root seed so individual experiments reproduce in isolation.
inline std::mt19937_64 substream(std::uint64_t root, std::string_view name, std::uint64_t index = 0) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : name) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001b3ULL;
    }
    std::uint64_t s = splitmix64(root ^ splitmix64(h ^ splitmix64(index)));
    return std::mt19937_64(s);
}

/// Uniform integer in [0, n) without distribution-object portability
/// concerns: results are identical across standard libraries.
inline std::uint64_t uniform_below(std::mt19937_64& eng, std::uint64_t n) {
    // Lemire-style rejection.
    std::uint64_t x = eng();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
        std::uint64_t t = (0 - n) % n;
        while (lo < t) {
            x = eng();
            m = static_cast<__uint128_t>(x) * n;
            lo = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

inline double uniform_real(std::mt19937_64& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller on the portable uniform.
inline double normal(std::mt19937_64& eng) {
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform_real(eng);
    double u2 = uniform_real(eng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

template <typename T>
void shuffle_vec(std::vector<T>& v, std::mt19937_64& eng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = uniform_below(eng, i);
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace panelml
