#include "brvr/rng.hpp"

namespace brvr {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t key_a, std::uint64_t key_b) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ key_a);
  h = splitmix64(h ^ (key_b + 0x632be59bd9b4e019ULL));
  return h;
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  // Rejection sampling keeps the draw exactly uniform and independent of the
  // standard library's distribution implementation.
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = Rng::max() - (Rng::max() % range + 1) % range;
  std::uint64_t v;
  do {
    v = rng();
  } while (v > limit);
  return static_cast<std::size_t>(v % range);
}

double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace brvr
