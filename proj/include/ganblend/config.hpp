#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace ganblend {

// Architecture of the desk-scale generator. Bands are the powers of two from
// 4 to max_resolution; every band has an entry in channels_per_band.
struct GeneratorConfig {
  int latent_dim = 64;
  int style_dim = 64;
  int mapping_layers = 2;
  int max_resolution = 64;
  std::map<int, int> channels_per_band{{4, 64}, {8, 64}, {16, 32}, {32, 16}, {64, 8}};

  std::vector<int> bands() const;
  bool has_band(int resolution) const;
  int channels(int resolution) const;

  // Throws Error(Config) on any violated invariant.
  void validate() const;

  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

bool is_power_of_two(long long v) noexcept;

// Canonical JSON (sorted keys, compact) so serialized checkpoints are byte-stable.
std::string config_to_json(const GeneratorConfig& config);
GeneratorConfig config_from_json(std::string_view text);

}  // namespace ganblend
