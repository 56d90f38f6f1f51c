#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ganblend/checkpoint.hpp"

namespace ganblend {

enum class Stage { Mapping, Synthesis };

enum class Role {
  MapWeight,
  MapBias,
  Const,
  ConvWeight,
  ConvBias,
  StyleAffineWeight,
  StyleAffineBias,
  NoiseStrength,
  ToRgbWeight,
  ToRgbBias,
};

std::string_view to_string(Stage stage);
std::string_view to_string(Role role);

// Where a parameter lives: resolution is set iff stage == Synthesis.
struct LayerKey {
  Stage stage;
  std::optional<int> resolution;
  Role role;

  friend bool operator==(const LayerKey&, const LayerKey&) = default;
};

// Parses the parameter-name grammar
//   mapping.fc{i}.{weight|bias}
//   synthesis.b{r}.const
//   synthesis.b{r}.conv{0|1}.{weight|bias|affine_weight|affine_bias|noise_strength}
//   synthesis.b{r}.torgb.{weight|bias|affine_weight|affine_bias}
// with r a power of two >= 4. Throws Error(Grammar) naming the bad segment.
LayerKey classify(std::string_view name);

struct BandPartition {
  std::map<int, std::vector<std::string>> bands;  // one list per config band
  std::vector<std::string> mapping;

  std::size_t total() const;
};

BandPartition partition(const Checkpoint& ckpt);
BandPartition partition(std::span<const std::string> names, const GeneratorConfig& config);

}  // namespace ganblend
