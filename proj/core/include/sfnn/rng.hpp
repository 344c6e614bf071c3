#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace sfnn {

/// xoshiro256** (Blackman & Vigna, 2018) seeded through splitmix64.
///
/// The output sequence depends only on the 64-bit seed, never on the platform
/// or standard library, so multi-seed experiments replay exactly. Normal
/// deviates use the Box-Muller transform and keep the second
/// deviate of each pair for the next call.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t next_u64() noexcept;
  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform01(); }
  /// Uniform integer in [0, n), n > 0. Uses rejection to avoid modulo bias.
  std::uint64_t uniform_index(std::uint64_t n) noexcept;
  double standard_normal() noexcept;

  template <typename T>
  void shuffle(std::vector<T>& items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> state_{};
  std::optional<double> spare_normal_;
};

/// n i.i.d. standard normal draws.
std::vector<double> rng_standard_normal(SeededRng& rng, std::size_t n);

}  // namespace sfnn
