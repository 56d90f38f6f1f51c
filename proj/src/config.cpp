#include "ganblend/config.hpp"

#include "json.hpp"

#include "ganblend/error.hpp"

namespace ganblend {

using nlohmann::json;

bool is_power_of_two(long long v) noexcept { return v > 0 && (v & (v - 1)) == 0; }

std::vector<int> GeneratorConfig::bands() const {
  std::vector<int> out;
  for (int r = 4; r <= max_resolution; r *= 2) out.push_back(r);
  return out;
}

bool GeneratorConfig::has_band(int resolution) const {
  return resolution >= 4 && resolution <= max_resolution && is_power_of_two(resolution);
}

int GeneratorConfig::channels(int resolution) const {
  const auto it = channels_per_band.find(resolution);
  if (it == channels_per_band.end()) {
    throw Error(ErrorKind::Config, "no channel count for band " + std::to_string(resolution));
  }
  return it->second;
}

void GeneratorConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::Config, msg); };
  if (latent_dim < 1) fail("latent_dim must be >= 1");
  if (style_dim < 1) fail("style_dim must be >= 1");
  if (mapping_layers < 1) fail("mapping_layers must be >= 1");
  if (max_resolution < 4 || !is_power_of_two(max_resolution)) {
    fail("max_resolution must be a power of two >= 4, got " + std::to_string(max_resolution));
  }
  const auto expected = bands();
  if (channels_per_band.size() != expected.size()) {
    fail("channels_per_band must list exactly the bands 4.." + std::to_string(max_resolution));
  }
  for (int r : expected) {
    const auto it = channels_per_band.find(r);
    if (it == channels_per_band.end()) fail("channels_per_band is missing band " + std::to_string(r));
    if (it->second < 1) fail("band " + std::to_string(r) + " needs at least one channel");
  }
}

std::string config_to_json(const GeneratorConfig& config) {
  json channels = json::object();
  for (const auto& [r, c] : config.channels_per_band) channels[std::to_string(r)] = c;
  json j = {{"latent_dim", config.latent_dim},
            {"style_dim", config.style_dim},
            {"mapping_layers", config.mapping_layers},
            {"max_resolution", config.max_resolution},
            {"channels_per_band", channels}};
  return j.dump();
}

GeneratorConfig config_from_json(std::string_view text) {
  GeneratorConfig config;
  try {
    const json j = json::parse(text);
    config.latent_dim = j.value("latent_dim", config.latent_dim);
    config.style_dim = j.value("style_dim", config.style_dim);
    config.mapping_layers = j.value("mapping_layers", config.mapping_layers);
    config.max_resolution = j.value("max_resolution", config.max_resolution);
    if (j.contains("channels_per_band")) {
      config.channels_per_band.clear();
      for (const auto& [key, value] : j.at("channels_per_band").items()) {
        config.channels_per_band[std::stoi(key)] = value.get<int>();
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, std::string("invalid config JSON: ") + e.what());
  } catch (const std::logic_error& e) {
    throw Error(ErrorKind::Config, std::string("invalid config JSON: ") + e.what());
  }
  config.validate();
  return config;
}

}  // namespace ganblend
