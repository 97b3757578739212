#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>

namespace somreplay {

/// Counter-based pseudo random generator.
///
/// Output k of stream (seed, stream_id) is mix64(key + k * golden), where key
/// is derived from the seed and stream id with the SplitMix64 finalizer. The
/// sequence depends only on (seed, stream_id, number of draws), so independent
/// streams for parallel work are obtained with derive() rather than by sharing
/// one instance.
///
/// Normal deviates use the Box-Muller transform; the second value of each
/// pair is cached, so an interleaved call sequence is part of the state.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 42, std::uint64_t stream_id = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Standard normal deviate.
  double normal();

  /// Fills `out` with standard normal deviates.
  void fill_normal(std::span<double> out);

  /// Independent generator for sub-stream `child` of this generator's stream.
  [[nodiscard]] Rng derive(std::uint64_t child) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

  /// In-place Fisher-Yates shuffle with a fixed, platform-independent order.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

}  // namespace somreplay
