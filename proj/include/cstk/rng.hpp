#pragma once

#include <cstdint>
#include <cstddef>
#include <vector>

namespace cstk::rng {

// splitmix64; used everywhere instead of std distributions so that seeded
// runs are byte-identical across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  std::size_t below(std::size_t n) { return n == 0 ? 0 : static_cast<std::size_t>(next() % n); }

  template <class T>
  void shuffle(std::vector<T>& xs) {
    for (std::size_t i = xs.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(xs[i - 1], xs[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// Derive an independent stream seed, e.g. per corpus pair.
inline std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
  Rng r(seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
  return r.next();
}

}  // namespace cstk::rng
