#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>

namespace phylo {

/// Philox4x32-10 counter-based generator.
///
/// A stream is identified by (seed, stream id); draws within a stream are
/// addressed by a 64-bit counter, so independent streams can be handed to
/// different sites, branches or replicates and evaluated in any order without
/// changing the values each stream produces.
class Rng {
 public:
  using result_type = std::uint32_t;

  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0) noexcept;

  /// Child stream keyed by a name and an index. Deterministic in
  /// (seed, stream, name, index) and independent of how many draws the parent
  /// has made.
  Rng substream(std::string_view name, std::uint64_t index = 0) const noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  std::uint32_t next_u32() noexcept;
  std::uint64_t next_u64() noexcept;

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform on (0, 1).
  double uniform_open() noexcept;
  /// Uniform integer on [0, n); n must be positive.
  std::uint64_t index(std::uint64_t n) noexcept;
  double exponential(double rate) noexcept;
  double normal() noexcept;
  /// Gamma(shape, scale), Marsaglia-Tsang.
  double gamma(double shape, double scale) noexcept;

  // UniformRandomBitGenerator, for std::shuffle and friends.
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }
  result_type operator()() noexcept { return next_u32(); }

 private:
  void refill() noexcept;

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_ = 0;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// SplitMix64 finalizer; used to derive stream ids.
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace phylo
