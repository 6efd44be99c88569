#pragma once

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <algorithm>
#include <cstdint>
#include <random>
#include <string_view>

namespace bugseg {

using Rng = std::mt19937_64;

// Stable 64-bit FNV-1a; unlike std::hash it is identical across platforms.
constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL) {
    std::uint64_t h = basis;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Per-stage seed expansion: every random consumer derives its seed from the
// root seed and a fixed stage name, so adding a stage never perturbs another.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view stage) {
    return splitmix64(root ^ fnv1a64(stage));
}

constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
    return splitmix64(root ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

// Distribution helpers. Boost's distributions are used instead of <random>'s
// because the standard leaves their algorithms unspecified, which would make
// seeded outputs differ between standard libraries.
inline double uniform01(Rng& rng) { return boost::random::uniform_01<double>{}(rng); }

inline double standard_normal(Rng& rng) { return boost::random::normal_distribution<double>{}(rng); }

// Uniform integer in [lo, hi].
template <typename Int>
Int uniform_int(Rng& rng, Int lo, Int hi) {
    return boost::random::uniform_int_distribution<Int>{lo, hi}(rng);
}

// Fisher-Yates shuffle driven by uniform_int (std::shuffle is unspecified).
template <typename It>
void stable_shuffle(It first, It last, Rng& rng) {
    const auto n = last - first;
    for (auto i = n - 1; i > 0; --i) {
        auto j = uniform_int<decltype(i)>(rng, 0, i);
        std::iter_swap(first + i, first + j);
    }
}

} // namespace bugseg
