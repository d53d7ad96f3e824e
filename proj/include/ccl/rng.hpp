#pragma once

#include <cstdint>
#include <random>

namespace ccl {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for a named sub-stream (dataset, split, augmentation, init, ...).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
    return mix_seed(mix_seed(base) ^ mix_seed(stream + 0x51ed27b3ULL));
}

namespace streams {
inline constexpr std::uint64_t dataset = 1;
inline constexpr std::uint64_t split = 2;
inline constexpr std::uint64_t init = 3;
inline constexpr std::uint64_t train_views = 4;
inline constexpr std::uint64_t eval_views = 5;
inline constexpr std::uint64_t shuffle = 6;
inline constexpr std::uint64_t graph_templates = 7;
}  // namespace streams

}  // namespace ccl
