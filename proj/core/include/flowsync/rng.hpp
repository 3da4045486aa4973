#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace flowsync {

/// Philox4x32-10 block function (Salmon et al., SC'11). Exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key);

/// Counter-based random stream. The 64-bit seed is the Philox key; the stream id
/// occupies the upper half of the 128-bit counter and the block index the lower
/// half, so every (seed, stream_id) pair addresses a disjoint sequence.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  /// Standard normal draw (Box-Muller; the second variate of each pair is cached).
  double gaussian();
  bool bernoulli(double p) { return uniform() < p; }

  /// Independent child stream: same seed, stream id mixed with `tag`.
  RngStream split(std::uint64_t tag) const;

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  std::size_t buffered_ = 0;
  std::optional<double> spare_gaussian_;
};

/// n standard normal draws from `rng`.
std::vector<double> gaussian_sample(RngStream& rng, std::size_t n);

/// SplitMix64 finalizer; used to derive stream ids.
std::uint64_t mix64(std::uint64_t x);

}  // namespace flowsync
