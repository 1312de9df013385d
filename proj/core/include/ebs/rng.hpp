#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ebs {

/// Deterministic random stream. Same seed yields the same draw sequence on
/// every platform: mt19937_64 output is fully specified by the standard and
/// all derived draws below avoid implementation-defined distributions.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random mantissa bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Unbiased uniform integer in [0, n). Requires n >= 1.
  int next_below(int n);

  /// New independent stream keyed by (seed, salts...) via splitmix64 mixing.
  static RngStream derive(std::uint64_t seed,
                          std::initializer_list<std::uint64_t> salts);

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 finalizer, used for stream derivation and work-item hashing.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace ebs
