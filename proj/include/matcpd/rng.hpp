#pragma once

#include <cstdint>
#include <cmath>

#include <Eigen/Core>

// Counter-based random numbers.  Every variate is addressed by
// (key, draw index), so replicate k of a simulation can be produced in
// isolation and results do not depend on evaluation order or thread count.

namespace matcpd {

namespace detail {

// SplitMix64 finalizer; bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

}  // namespace detail

// Keyed stream derivation.  Not commutative: derive_seed(a,b) != derive_seed(b,a).
constexpr std::uint64_t derive_seed(std::uint64_t key, std::uint64_t word) noexcept {
  return detail::mix64((key + detail::kGolden) ^
                       (word * 0xd1b54a32d192ed03ull + 0x8cb92ba72f3d8dd7ull));
}

constexpr std::uint64_t derive_seed(std::uint64_t key, std::uint64_t w1,
                                    std::uint64_t w2) noexcept {
  return derive_seed(derive_seed(key, w1), w2);
}

// Stateless generator over a keyed stream.  uniform(i) and normal(i) depend
// only on (key, i); normal(i) consumes the uniform counters 2i and 2i+1.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t bits(std::uint64_t i) const noexcept {
    return detail::mix64(key_ ^ (i * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull));
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform(std::uint64_t i) const noexcept {
    return static_cast<double>(bits(i) >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1]; safe as a log argument.
  double uniform_pos(std::uint64_t i) const noexcept {
    return static_cast<double>((bits(i) >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the sine companion is discarded so that
  // draw i never depends on its neighbours.
  double normal(std::uint64_t i) const noexcept {
    const double u1 = uniform_pos(2 * i);
    const double u2 = uniform(2 * i + 1);
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Uniform integer on [0, n) by rejection-free scaling; n must be > 0.
  // Bias is < n / 2^64, negligible for the index ranges used here.
  std::uint64_t uniform_index(std::uint64_t i, std::uint64_t n) const noexcept {
    return static_cast<std::uint64_t>(
        static_cast<unsigned __int128>(bits(i)) * n >> 64);
  }

  std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
};

inline Eigen::VectorXd normal_vector(std::uint64_t key, Eigen::Index n) {
  CounterRng rng(key);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal(static_cast<std::uint64_t>(i));
  return v;
}

}  // namespace matcpd
