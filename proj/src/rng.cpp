#include "ganblend/rng.hpp"

#include <cmath>
#include <numbers>

namespace ganblend {

namespace {
constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ull;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

KeyedStream::KeyedStream(std::uint64_t seed, std::string_view name)
    : key_(splitmix64(seed ^ splitmix64(fnv1a64(name)))) {}

std::uint64_t KeyedStream::next_u64() noexcept {
  ++counter_;
  return splitmix64(key_ + counter_ * kGoldenGamma);
}

double KeyedStream::next_uniform() noexcept {
  // 53 random bits, shifted off zero.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

float KeyedStream::next_normal() noexcept {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return static_cast<float>(v);
  }
  const double u1 = next_uniform();
  const double u2 = next_uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  return static_cast<float>(radius * std::cos(angle));
}

}  // namespace ganblend
