#pragma once

#include <array>
#include <cstdint>

#include "wdiff/types.hpp"

namespace wdiff {

/// Philox4x32-10 counter-based generator.
///
/// A stream is identified by (key, stream id). The 128-bit counter holds the
/// block index in its low 64 bits and the stream id in its high 64 bits, so
/// distinct path indices never share a block and any path can be regenerated
/// without replaying the others.
class PhiloxStream {
 public:
  using Block = std::array<std::uint32_t, 4>;

  PhiloxStream(std::uint64_t seed, std::uint64_t stream_id);

  /// Raw block function; exposed for known-answer tests.
  static Block philox4x32_10(Block counter, std::array<std::uint32_t, 2> key);

  /// Next 4x32 block (advances the block counter).
  Block next_block();

  /// Uniform double in the open interval (0, 1) with 53 random bits.
  double uniform();

  /// Standard normal via Box-Muller on two consecutive uniforms; the second
  /// variate of each pair is cached.
  double normal();

  /// Fill the first `d` entries of a vector with independent standard normals.
  Vec normal_vec(int d);

  std::uint64_t stream_id() const { return stream_; }
  std::uint64_t blocks_used() const { return block_; }

 private:
  std::array<std::uint32_t, 2> key_{};
  std::uint64_t stream_ = 0;
  std::uint64_t block_ = 0;
  Block buffer_{};
  int buffered_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;

  std::uint32_t next_u32();
};

/// Derive a child seed from (seed, tag); used to give independent streams to
/// auxiliary computations such as quadrature without correlating with paths.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

}  // namespace wdiff
