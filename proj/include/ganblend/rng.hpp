#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace ganblend {

// Counter-based stream keyed by (seed, name). Element i of the stream is
// splitmix64(key + (i + 1) * golden_gamma) where
// key = splitmix64(seed ^ splitmix64(fnv1a64(name))). Normals use Box-Muller
// on pairs of 53-bit uniforms, consuming both outputs.
class KeyedStream {
 public:
  KeyedStream(std::uint64_t seed, std::string_view name);

  std::uint64_t next_u64() noexcept;
  double next_uniform() noexcept;  // in (0, 1)
  float next_normal() noexcept;

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::optional<double> spare_;
};

std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace ganblend
