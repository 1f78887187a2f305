#ifndef ICDA_RNG_HPP
#define ICDA_RNG_HPP

#include <cstdint>
#include <string_view>
#include <vector>

namespace icda {

// splitmix64; stable across platforms, unlike distribution wrappers.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Unbiased enough for shuffling small collections.
  uint64_t next_below(uint64_t bound) { return bound ? next() % bound : 0; }

  double next_unit() {
    return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0);
  }

 private:
  uint64_t state_;
};

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Derives an independent stream seed from a master seed and a tag, so that
// adding one consumer does not perturb the others.
inline uint64_t derive_seed(uint64_t master, std::string_view tag) {
  SplitMix64 mix(master ^ fnv1a64(tag));
  return mix.next();
}

inline uint64_t derive_seed(uint64_t master, std::string_view tag, uint64_t index) {
  SplitMix64 mix(master ^ fnv1a64(tag) ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
  return mix.next();
}

template <typename T>
void shuffle(std::vector<T>& items, SplitMix64& rng) {
  for (size_t i = items.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.next_below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace icda

#endif  // ICDA_RNG_HPP
