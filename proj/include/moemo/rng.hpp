#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace moemo {

/// Derives an independent seed for a named substream ("init", "shuffle", "synth", ...)
/// from the single user-visible seed.
std::uint64_t substream_seed(std::uint64_t seed, std::string_view stream);

/// Deterministic generator for one named substream.
class Rng {
 public:
  Rng(std::uint64_t seed, std::string_view stream) : engine_(substream_seed(seed, stream)) {}
  explicit Rng(std::uint64_t raw_seed) : engine_(raw_seed) {}

  double uniform(double lo, double hi);
  double normal();
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace moemo
