#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sparselm {

// Thrown for user-facing configuration and precondition violations.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a file does not match its declared format.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown on tensor dimension mismatches; the message names both shapes.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when an optimization or forward pass produces non-finite values.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  return fnv1a64(s.data(), s.size());
}

// Derives an independent stream seed from (seed, tag). Used so that adding or
// removing one tensor does not shift the random values drawn for the others.
inline std::uint64_t seed_for(std::uint64_t seed, std::string_view tag) {
  std::uint64_t h = fnv1a64(&seed, sizeof(seed));
  return fnv1a64(tag.data(), tag.size(), h);
}

// Deterministic RNG wrapper. All stochastic routines in this project draw
// through this class so runs are reproducible bit-for-bit on one platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next() { return eng_(); }

  // uniform in [0, 1), 53-bit resolution
  double uniform() { return double(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  std::uint64_t below(std::uint64_t n) { return eng_() % n; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace sparselm
