#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace sqiv {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// The 64-bit key is the user seed; the 128-bit counter is split into a
/// 64-bit block index and a 64-bit stream id, so every (seed, stream) pair is
/// an independent, reproducible sequence. Satisfies UniformRandomBitGenerator.
class Philox4x32 {
 public:
  using result_type = std::uint32_t;
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit Philox4x32(std::uint64_t seed = 0, std::uint64_t stream = 0);

  /// The raw bijection: ten rounds of Philox on (counter, key).
  static Block encrypt(Block counter, Key key);

  result_type operator()();
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  /// Uniform on the open interval (0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box–Muller (both variates are used).
  double normal();
  /// Standard Cauchy via the inverse CDF.
  double cauchy();
  bool bernoulli(double p) { return uniform() < p; }

 private:
  void refill();

  Key key_;
  std::uint64_t block_ = 0;
  std::uint64_t stream_;
  Block buffer_{};
  int used_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// Stream id for a tagged tuple of indices, so that e.g. replication r of
/// DGP d at sample size n always sees the same draws.
std::uint64_t stream_id(std::uint32_t tag, std::uint32_t a, std::uint32_t b);

}  // namespace sqiv
