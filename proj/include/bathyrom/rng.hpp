#ifndef BATHYROM_RNG_HPP
#define BATHYROM_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>

namespace bathyrom {

/// Seed that forces all normal draws to zero. Test hook: sampling a field
/// with this seed returns the prior mean exactly.
inline constexpr std::uint64_t kZeroNoiseSeed = ~std::uint64_t{0};

/// Counter-based deterministic generator (splitmix64 core). Pure integer
/// and IEEE double arithmetic, so streams are identical across platforms
/// for a given seed. Not cryptographic.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed), zero_noise_(seed == kZeroNoiseSeed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller; one fresh pair per two calls.
  double normal() {
    if (zero_noise_) return 0.0;
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    // guard log(0)
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// Independent stream keyed by (this seed, tag). Forking does not
  /// disturb the parent stream.
  [[nodiscard]] Rng fork(std::uint64_t tag) const {
    if (zero_noise_) return Rng(kZeroNoiseSeed);
    std::uint64_t h = state_ ^ 0x2545f4914f6cdd1dull;
    h ^= tag + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h *= 0xff51afd7ed558ccdull;
    h ^= h >> 33;
    return Rng(h);
  }

 private:
  std::uint64_t state_;
  bool zero_noise_ = false;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace bathyrom

#endif  // BATHYROM_RNG_HPP
