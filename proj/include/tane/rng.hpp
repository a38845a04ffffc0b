#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace tane {

/// PCG32 (XSH-RR, 64-bit LCG state) with hand-written conversions, so a
/// seed produces the same stream on every platform and standard library.
/// The std <random> distributions are implementation-defined and are not
/// used anywhere in the engine.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0x14057b7ef767814fULL);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Unbiased integer in [0, bound) (Lemire's method with rejection).
  std::uint32_t below(std::uint32_t bound);
  /// Standard normal via Box–Muller; caches the second variate.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = below(static_cast<std::uint32_t>(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// `count` distinct elements of `pool`, in random order.
  template <typename T>
  std::vector<T> sample(std::span<const T> pool, std::size_t count) {
    std::vector<T> items(pool.begin(), pool.end());
    // Partial Fisher–Yates: the first `count` slots end up a uniform sample.
    for (std::size_t i = 0; i < count && i < items.size(); ++i) {
      const std::size_t j =
          i + below(static_cast<std::uint32_t>(items.size() - i));
      std::swap(items[i], items[j]);
    }
    items.resize(std::min(count, items.size()));
    return items;
  }

 private:
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

/// Sub-seed for a named purpose, e.g. derive_seed(seed, "episode", 17).
/// FNV-1a over the tag mixed with SplitMix64.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0);

}  // namespace tane
