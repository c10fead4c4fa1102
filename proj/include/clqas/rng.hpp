#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace clqas {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed for a named sub-stream, e.g. derive_seed(master, {task, epoch}).
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = mix_seed(master);
    for (std::uint64_t p : path) s = mix_seed(s ^ mix_seed(p + 0x632BE59BD9B4E019ULL));
    return s;
}

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> path = {}) {
    return Rng(derive_seed(master, path));
}

// Stream tags keep derived seeds for different purposes apart.
namespace stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kShuffle = 2;
inline constexpr std::uint64_t kPolicy = 3;
inline constexpr std::uint64_t kFisher = 4;
inline constexpr std::uint64_t kData = 5;
inline constexpr std::uint64_t kTrajectory = 6;
inline constexpr std::uint64_t kShots = 7;
inline constexpr std::uint64_t kTtProbe = 8;
} // namespace stream

} // namespace clqas
