#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ganblend/checkpoint.hpp"
#include "ganblend/manifest.hpp"
#include "ganblend/tensor.hpp"

namespace ganblend {

// Per-layer noise is drawn from the stream keyed by (seed, "noise/<layer>.noise_strength").
struct NoiseSpec {
  std::uint64_t seed = 0;
};

// Materialized noise planes for every noisy layer of a config. Building one is
// the expensive part of noise handling, so repeated forwards should share it.
class NoiseBank {
 public:
  NoiseBank(const GeneratorConfig& config, NoiseSpec spec);

  const Tensor& plane(const std::string& noise_param) const;
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
  std::map<std::string, Tensor, std::less<>> planes_;
};

// A checkpoint's synthesis network with weights repacked for repeated
// rendering. Produces the same bits as synthesize()/activations_from_w().
class Synthesizer {
 public:
  explicit Synthesizer(const Checkpoint& ckpt);
  ~Synthesizer();
  Synthesizer(Synthesizer&&) noexcept;
  Synthesizer& operator=(Synthesizer&&) noexcept;

  const GeneratorConfig& config() const noexcept;

  Image render(std::span<const float> w, const NoiseBank& noise) const;
  // Same pixels as render(), as a view into per-thread scratch that stays
  // valid until the next render on this thread.
  std::span<const float> render_view(std::span<const float> w, const NoiseBank& noise) const;
  Tensor tap(std::span<const float> w, const NoiseBank& noise, int tap_r) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::vector<float> map_latent(const Checkpoint& ckpt, std::span<const float> z);

// Full generator: w = mapping(z), then synthesis.
Image forward(const Checkpoint& ckpt, std::span<const float> z, NoiseSpec noise);

// Synthesis only, with w used as the style input of every layer.
Image synthesize(const Checkpoint& ckpt, std::span<const float> w, const NoiseBank& noise);
Image synthesize(const Checkpoint& ckpt, std::span<const float> w, NoiseSpec noise);

// Feature map leaving band tap_r (after conv1's activation), [C_r, r, r].
Tensor activations(const Checkpoint& ckpt, std::span<const float> z, NoiseSpec noise, int tap_r);
Tensor activations_from_w(const Checkpoint& ckpt, std::span<const float> w, NoiseSpec noise,
                          int tap_r);

// Latent for sample `index` of a seeded batch: latent_dim normals from stream (seed, "z/<index>").
std::vector<float> sample_latent(const GeneratorConfig& config, std::uint64_t seed,
                                 std::size_t index);

// Weights ~ N(0, (1/sqrt(fan_in))^2), const ~ N(0, 1), biases and noise strengths 0.
Checkpoint init_random(const GeneratorConfig& config, std::uint64_t seed);

// Stand-in for transfer learning: synthesis tensors get strength * sigma * N(0,1)
// added per element, mapping tensors 0.01 * strength * sigma * N(0,1), where
// sigma is the tensor's standard deviation floored at 1e-3.
Checkpoint synth_transfer(const Checkpoint& base, float strength, std::uint64_t seed);

}  // namespace ganblend
