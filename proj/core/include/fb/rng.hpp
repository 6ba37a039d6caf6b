#pragma once

#include <array>
#include <cstdint>

namespace fb {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers:
/// as easy as 1, 2, 3"). Pure: the same (counter, key) always yields the same block.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Counter-based random stream.
///
/// A stream is a (key, counter) pair; drawing advances the counter. Streams are
/// split by deriving a child key from the parent key and a label, so the
/// sequence a component sees depends only on the seed and the split path, never
/// on how many draws other components made.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed = 0);

  /// Child stream keyed by (this key, label). Does not advance this stream.
  [[nodiscard]] RandomStream split(std::uint64_t label) const;

  std::uint64_t next_u64();
  std::uint32_t next_u32();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on the open interval (0, 1).
  double uniform_open();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Centered Cauchy with the given scale.
  double cauchy(double scale);
  bool bernoulli(double p) { return uniform() < p; }

  [[nodiscard]] std::uint64_t key() const { return key_; }
  [[nodiscard]] std::uint64_t counter() const { return counter_; }

 private:
  RandomStream(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}
  void refill();

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int block_pos_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// SplitMix64 finalizer, used for key derivation.
std::uint64_t mix64(std::uint64_t x);

}  // namespace fb
