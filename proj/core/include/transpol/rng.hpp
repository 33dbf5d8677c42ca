#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace transpol {

/// Counter-based random stream (Philox4x32-10).
///
/// A stream is fully described by (key, stream id, position), so independent
/// substreams can be derived without sharing state and any stream can be
/// re-created exactly from its description. Used for per-episode process
/// noise, observation noise and model sampling.
class RngStream {
 public:
  RngStream() : RngStream(0) {}
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0);

  /// Deterministically derived, statistically independent child stream.
  [[nodiscard]] RngStream substream(std::uint64_t id) const;

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform in the open interval (0, 1).
  double uniform();
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  void fill_normal(std::span<double> out);

  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] std::uint64_t stream() const { return stream_; }
  [[nodiscard]] std::uint64_t position() const { return counter_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finalizer; also used to hash stream identifiers.
std::uint64_t mix64(std::uint64_t x);

/// Named substream tags so call sites read like "env.substream(kProcessNoise)".
enum StreamTag : std::uint64_t {
  kProcessNoise = 0x70726f63,
  kObservationNoise = 0x6f627376,
  kPolicySampling = 0x706f6c69,
  kModelSampling = 0x6d6f6465,
  kReplaySampling = 0x7265706c,
  kInit = 0x696e6974,
  kHeldOut = 0x686f6c64,
  kTaskDraw = 0x7461736b,
};

}  // namespace transpol
