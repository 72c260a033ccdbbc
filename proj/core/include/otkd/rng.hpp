#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

namespace otkd {

// SplitMix64: a counter-based 64-bit generator. Draw k of a stream seeded
// with s is mix(s + (k+1)*0x9E3779B97F4A7C15), where mix is the fixed
// xor-shift-multiply finalizer below. Output depends only on (seed, k), so
// every stream is reproducible across platforms and languages.
//
//   mix(z): z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//           z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//           return z ^ (z >> 31)
//
// Uniform doubles take the top 53 bits; normals use Box-Muller with both
// outputs consumed in order.
class SplitMix64 {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static std::uint64_t mix(std::uint64_t z) noexcept;

  std::uint64_t next() noexcept;
  double uniform() noexcept;  // [0, 1)
  double uniform(double lo, double hi) noexcept;
  double normal() noexcept;
  // Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) noexcept;

  // Independent stream keyed by (seed, stream id).
  static SplitMix64 derive(std::uint64_t seed, std::uint64_t stream) noexcept;

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace otkd
