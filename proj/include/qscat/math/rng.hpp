#ifndef QSCAT_MATH_RNG_HPP
#define QSCAT_MATH_RNG_HPP

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string_view>

namespace qscat {

// FNV-1a, used for stage tags and output digests.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  return fnv1a64(s.data(), s.size());
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256++ with explicit, platform-independent output. All randomness in
// the project flows through this generator so that results are bit-identical
// across compilers and worker counts.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0,1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Marsaglia polar method; explicit algorithm keeps streams reproducible.
  void normal_pair(double& g1, double& g2) {
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    g1 = u * f;
    g2 = v * f;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double a, b;
    normal_pair(a, b);
    spare_ = b;
    have_spare_ = true;
    return a;
  }

  std::uint64_t index(std::uint64_t bound) { return next_u64() % bound; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4] = {};
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Counter-based stream derivation: (master seed, stage name, replica index)
// fully determines a stream, independent of scheduling.
inline RngStream make_stream(std::uint64_t master, std::string_view stage,
                             std::uint64_t index) {
  std::uint64_t st = master ^ fnv1a64(stage);
  std::uint64_t a = splitmix64(st);
  st ^= index * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL;
  std::uint64_t b = splitmix64(st);
  return RngStream(a ^ (b + index));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stage,
                                 std::uint64_t index = 0) {
  std::uint64_t st = master ^ fnv1a64(stage);
  std::uint64_t a = splitmix64(st);
  st ^= index * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL;
  return a ^ splitmix64(st);
}

}  // namespace qscat

#endif  // QSCAT_MATH_RNG_HPP
