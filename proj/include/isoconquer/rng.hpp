#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace isoconquer {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). The output is a
// pure function of (counter, key), so any draw can be recomputed in isolation.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter counter, Key key) noexcept;
};

/// Address of one reproducible random stream.
///
/// `domain` identifies the experiment (and grid cell), `replicate` the Monte
/// Carlo replicate and `substream` the subsample or path inside it. Two
/// different keys never share counter space, so results do not depend on
/// which worker evaluates which stream.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint32_t domain = 0;
  std::uint32_t replicate = 0;
  std::uint32_t substream = 0;
};

/// Stable 32-bit domain tag for an experiment name and grid cell.
std::uint32_t domain_tag(std::string_view name, std::uint32_t cell = 0) noexcept;

/// Sequential reader over one Philox stream.
class Stream {
 public:
  explicit Stream(StreamKey key) noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform on the open interval (0, 1).
  double uniform() noexcept;
  /// Standard normal via Box-Muller; one Philox block yields two variates.
  double normal() noexcept;
  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound) noexcept;

  const StreamKey& key() const noexcept { return key_; }

 private:
  void refill() noexcept;

  StreamKey key_;
  Philox4x32::Key philox_key_;
  std::uint32_t block_ = 0;
  Philox4x32::Counter buffer_{};
  int used_ = 4;  // 32-bit words consumed from buffer_
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace isoconquer
