#include "ganblend/manifest.hpp"

namespace ganblend {

std::string mapping_param(int layer, const char* field) {
  return "mapping.fc" + std::to_string(layer) + "." + field;
}

std::string synthesis_param(int resolution, const char* layer, const char* field) {
  std::string name = "synthesis.b" + std::to_string(resolution) + "." + layer;
  if (*field) name += std::string(".") + field;
  return name;
}

std::vector<ParamSpec> manifest(const GeneratorConfig& config) {
  config.validate();
  const auto sd = static_cast<std::size_t>(config.style_dim);
  std::vector<ParamSpec> out;

  for (int i = 0; i < config.mapping_layers; ++i) {
    const auto in = static_cast<std::size_t>(i == 0 ? config.latent_dim : config.style_dim);
    out.push_back({mapping_param(i, "weight"), {sd, in}});
    out.push_back({mapping_param(i, "bias"), {sd}});
  }

  auto add_conv = [&](int r, const char* layer, std::size_t cin, std::size_t cout) {
    out.push_back({synthesis_param(r, layer, "weight"), {cout, cin, 3, 3}});
    out.push_back({synthesis_param(r, layer, "bias"), {cout}});
    out.push_back({synthesis_param(r, layer, "affine_weight"), {cin, sd}});
    out.push_back({synthesis_param(r, layer, "affine_bias"), {cin}});
    out.push_back({synthesis_param(r, layer, "noise_strength"), {1}});
  };

  std::size_t prev = 0;
  for (int r : config.bands()) {
    const auto c = static_cast<std::size_t>(config.channels(r));
    if (r == 4) {
      out.push_back({synthesis_param(r, "const", ""), {c, 4, 4}});
    } else {
      add_conv(r, "conv0", prev, c);
    }
    add_conv(r, "conv1", c, c);
    out.push_back({synthesis_param(r, "torgb", "weight"), {3, c, 1, 1}});
    out.push_back({synthesis_param(r, "torgb", "bias"), {3}});
    out.push_back({synthesis_param(r, "torgb", "affine_weight"), {c, sd}});
    out.push_back({synthesis_param(r, "torgb", "affine_bias"), {c}});
    prev = c;
  }
  return out;
}

}  // namespace ganblend
