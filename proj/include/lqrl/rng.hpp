#pragma once

#include <array>
#include <cstdint>

namespace lqrl {

/// Philox4x32-10 counter-based block function.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter ctr, Key key);
};

/// Reserved phase index for draws that belong to no phase (initial estimates,
/// perturbation directions).
inline constexpr std::uint32_t kAuxiliaryPhase = 0xFFFFFFFFu;

/// Random substream keyed by (master_seed, phase, episode).
///
/// The key is the 64-bit master seed, the counter is
/// (block_lo, block_hi, episode, phase). Two streams with distinct keys
/// never share a Philox block. Normals use Box-Muller on 53-bit uniforms,
/// two normals per block.
class SubstreamRng {
 public:
  SubstreamRng(std::uint64_t master_seed, std::uint32_t phase, std::uint32_t episode);

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();

 private:
  Philox4x32::Counter next_block();

  Philox4x32::Key key_;
  std::uint32_t phase_;
  std::uint32_t episode_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> words_{};
  int words_left_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace lqrl
