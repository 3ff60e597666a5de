#ifndef BRVR_RNG_HPP
#define BRVR_RNG_HPP

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace brvr {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to turn structured keys into well-mixed seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// Stable 64-bit FNV-1a hash of a string, for tagging seed streams.
std::uint64_t hash_tag(std::string_view tag);

/// Derives an independent stream seed from a master seed and up to two keys.
/// Pure function: the same inputs always give the same seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t key_a, std::uint64_t key_b = 0);

/// Uniform index in [0, n). n must be positive.
std::size_t uniform_index(Rng& rng, std::size_t n);

/// Uniform double in [0, 1) built from the top 53 bits.
double uniform01(Rng& rng);

}  // namespace brvr

#endif  // BRVR_RNG_HPP
