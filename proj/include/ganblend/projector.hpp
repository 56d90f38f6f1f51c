#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "ganblend/checkpoint.hpp"
#include "ganblend/tensor.hpp"

namespace ganblend {

enum class LatentSpace { Z, W };

std::string_view to_string(LatentSpace space);
LatentSpace latent_space_from_string(std::string_view text);

struct ProjectionConfig {
  LatentSpace space = LatentSpace::W;
  int steps = 300;
  float learning_rate = 0.05f;
  float adam_beta1 = 0.9f;
  float adam_beta2 = 0.999f;
  float adam_eps = 1e-8f;
  float fd_step = 1e-3f;  // central-difference half step is fd_step * (1 + |x_i|)
  std::uint64_t seed = 0;

  void validate() const;
};

// Reads any subset of {"space","steps","learning_rate","adam_beta1","adam_beta2",
// "adam_eps","fd_step","seed"}; absent keys keep their defaults.
ProjectionConfig projection_config_from_json(std::string_view text);

struct ProjectionResult {
  LatentSpace space = LatentSpace::W;
  std::vector<float> latent;      // best latent seen
  std::vector<float> loss_trace;  // MSE at the start of each step
  Image reconstruction;
  double final_loss = 0.0;        // MSE(reconstruction, target)
};

// Called after each step with (step index, loss at the start of that step).
using ProgressFn = std::function<void(int, double)>;

// W: mean of 1024 mapped z's drawn from stream (seed, "projector/w_avg"). Z: zero vector.
std::vector<float> initial_latent(const Checkpoint& ckpt, const ProjectionConfig& cfg);

// Renders a latent of the given space (W bypasses the mapping network).
Image render_latent(const Checkpoint& ckpt, std::span<const float> latent, LatentSpace space,
                    std::uint64_t noise_seed);

// Adam on pixel MSE with central finite-difference gradients; noise fixed from cfg.seed.
ProjectionResult project(const Checkpoint& ckpt, const Image& target, const ProjectionConfig& cfg,
                         const ProgressFn& progress = {});

struct ToonifyResult {
  ProjectionResult projection;
  Image image;
};

// Projects into `base`, then renders the recovered latent with `blended`.
ToonifyResult toonify_detailed(const Checkpoint& base, const Checkpoint& blended,
                               const Image& target, const ProjectionConfig& cfg,
                               const ProgressFn& progress = {});
Image toonify(const Checkpoint& base, const Checkpoint& blended, const Image& target,
              const ProjectionConfig& cfg);

// {"space":"w","values":[...],"final_loss":...,"model_id":"..."}
std::string latent_to_json(const ProjectionResult& result, std::string_view model_id);

}  // namespace ganblend
