#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

namespace reskan {

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a master seed, a textual label and a
// counter. All randomness in the project flows through this so that parallel
// and serial executions draw identical values.
inline uint64_t derive_seed(uint64_t master, std::string_view label, uint64_t counter = 0) {
  uint64_t h = fnv1a64(label);
  h ^= splitmix64(master + 0x632be59bd9b4e019ull);
  h ^= splitmix64(counter + 0x9e3779b97f4a7c15ull * 3);
  return splitmix64(h);
}

// mt19937_64 wrapper with hand-rolled distributions. The engine's output is
// fully specified by the standard; std::*_distribution is not, so uniform and
// normal variates are produced here to keep runs bit-reproducible across
// library versions.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : eng_(seed) {}

  static RngStream labeled(uint64_t master, std::string_view label, uint64_t counter = 0) {
    return RngStream(derive_seed(master, label, counter));
  }

  uint64_t next_u64() { return eng_(); }

  // Uniform on [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform on (0,1); safe under log().
  double uniform_positive() {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return u;
  }

  // Uniform integer in [0, n).
  uint64_t uniform_index(uint64_t n) {
    // Rejection keeps the draw unbiased.
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
      v = eng_();
    } while (v >= limit);
    return v % n;
  }

  // Standard normal via the Marsaglia polar method; the spare is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  std::string serialize() const {
    std::ostringstream os;
    os << eng_ << " " << (has_spare_ ? 1 : 0) << " ";
    os.precision(17);
    os << spare_;
    return os.str();
  }

  void deserialize(const std::string& s) {
    std::istringstream is(s);
    int hs = 0;
    is >> eng_ >> hs >> spare_;
    has_spare_ = hs != 0;
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace reskan
