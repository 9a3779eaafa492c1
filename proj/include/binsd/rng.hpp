#ifndef BINSD_RNG_HPP
#define BINSD_RNG_HPP

#include <cstdint>
#include <string_view>

namespace binsd {

/// Deterministic generator used everywhere randomness is needed.
///
/// The core is splitmix64 (Steele, Lea, Vigna 2014): a 64-bit counter
/// advanced by the golden-gamma constant and scrambled by two xor-shift
/// multiplies. Child streams are derived by hashing a (seed, key) pair,
/// so independent corpus entities get independent streams regardless of
/// generation order. The algorithm is fixed by this project's file
/// format version: corpora must be bit-reproducible across platforms,
/// which rules out the standard library distributions.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) from the top 53 bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Uniform integer in [0, n). Rejection-free scaling is fine here:
  /// n is tiny compared to 2^64, the bias is below 2^-32.
  std::uint64_t next_below(std::uint64_t n) {
    return n == 0 ? 0 : next_u64() % n;
  }

  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(next_below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  bool bernoulli(double p) { return next_double() < p; }

  /// Derive an independent child stream for (key, index).
  SplitMix64 split(std::string_view key, std::uint64_t index = 0) const {
    std::uint64_t h = state_ ^ 0x8824a3d7f2cbe13bULL;
    for (char c : key) {
      h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
      h *= 0x100000001b3ULL;  // FNV-1a prime
    }
    h ^= index + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    SplitMix64 child(h);
    child.next_u64();  // decorrelate from the raw hash
    return child;
  }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

/// Fisher-Yates shuffle driven by SplitMix64.
template <typename Vec>
void shuffle(Vec& v, SplitMix64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    using std::swap;
    swap(v[i - 1], v[j]);
  }
}

/// Name recorded in corpus headers so readers can verify reproducibility.
inline constexpr std::string_view kRngAlgorithm = "splitmix64";

}  // namespace binsd

#endif  // BINSD_RNG_HPP
