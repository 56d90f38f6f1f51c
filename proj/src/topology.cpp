#include "ganblend/topology.hpp"

#include <algorithm>
#include <charconv>

namespace ganblend {

std::string_view to_string(Stage stage) {
  return stage == Stage::Mapping ? "mapping" : "synthesis";
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::MapWeight: return "map_weight";
    case Role::MapBias: return "map_bias";
    case Role::Const: return "const";
    case Role::ConvWeight: return "conv_weight";
    case Role::ConvBias: return "conv_bias";
    case Role::StyleAffineWeight: return "style_affine_weight";
    case Role::StyleAffineBias: return "style_affine_bias";
    case Role::NoiseStrength: return "noise_strength";
    case Role::ToRgbWeight: return "torgb_weight";
    case Role::ToRgbBias: return "torgb_bias";
  }
  return "unknown";
}

namespace {

std::vector<std::string_view> split(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto dot = s.find('.', start);
    parts.push_back(s.substr(start, dot - start));
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return parts;
}

[[noreturn]] void grammar_error(std::string_view name, std::string_view segment,
                                std::string_view why) {
  throw Error(ErrorKind::Grammar, "cannot classify '" + std::string(name) + "': segment '" +
                                      std::string(segment) + "' " + std::string(why));
}

// Decimal digits without sign or leading zero.
std::optional<long long> parse_index(std::string_view digits) {
  if (digits.empty() || (digits.size() > 1 && digits[0] == '0')) return std::nullopt;
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
  if (ec != std::errc() || ptr != digits.data() + digits.size()) return std::nullopt;
  return v;
}

}  // namespace

LayerKey classify(std::string_view name) {
  const auto seg = split(name);
  if (seg[0] == "mapping") {
    if (seg.size() != 3) grammar_error(name, name, "must have form mapping.fc{i}.{weight|bias}");
    if (seg[1].substr(0, 2) != "fc" || !parse_index(seg[1].substr(2))) {
      grammar_error(name, seg[1], "is not fc{i}");
    }
    if (seg[2] == "weight") return {Stage::Mapping, std::nullopt, Role::MapWeight};
    if (seg[2] == "bias") return {Stage::Mapping, std::nullopt, Role::MapBias};
    grammar_error(name, seg[2], "is not weight|bias");
  }
  if (seg[0] != "synthesis") grammar_error(name, seg[0], "is not mapping|synthesis");
  if (seg.size() < 3) grammar_error(name, name, "is too short for a synthesis parameter");

  const auto r = seg[1].substr(0, 1) == "b" ? parse_index(seg[1].substr(1)) : std::nullopt;
  if (!r) grammar_error(name, seg[1], "is not b{r}");
  if (*r < 4 || !is_power_of_two(*r) || *r > (1 << 30)) {
    grammar_error(name, seg[1], "is not a power-of-two resolution >= 4");
  }
  const int res = static_cast<int>(*r);

  if (seg[2] == "const") {
    if (seg.size() != 3) grammar_error(name, seg[3], "unexpected after const");
    return {Stage::Synthesis, res, Role::Const};
  }
  if (seg.size() != 4) grammar_error(name, name, "must have form synthesis.b{r}.{layer}.{field}");

  const auto& field = seg[3];
  if (seg[2] == "conv0" || seg[2] == "conv1") {
    if (field == "weight") return {Stage::Synthesis, res, Role::ConvWeight};
    if (field == "bias") return {Stage::Synthesis, res, Role::ConvBias};
    if (field == "affine_weight") return {Stage::Synthesis, res, Role::StyleAffineWeight};
    if (field == "affine_bias") return {Stage::Synthesis, res, Role::StyleAffineBias};
    if (field == "noise_strength") return {Stage::Synthesis, res, Role::NoiseStrength};
    grammar_error(name, field, "is not a conv field");
  }
  if (seg[2] == "torgb") {
    if (field == "weight") return {Stage::Synthesis, res, Role::ToRgbWeight};
    if (field == "bias") return {Stage::Synthesis, res, Role::ToRgbBias};
    if (field == "affine_weight") return {Stage::Synthesis, res, Role::StyleAffineWeight};
    if (field == "affine_bias") return {Stage::Synthesis, res, Role::StyleAffineBias};
    grammar_error(name, field, "is not a torgb field");
  }
  grammar_error(name, seg[2], "is not const|conv0|conv1|torgb");
}

std::size_t BandPartition::total() const {
  std::size_t n = mapping.size();
  for (const auto& [r, names] : bands) n += names.size();
  return n;
}

BandPartition partition(std::span<const std::string> names, const GeneratorConfig& config) {
  BandPartition out;
  for (int r : config.bands()) out.bands[r];
  for (const auto& name : names) {
    const auto key = classify(name);
    if (key.stage == Stage::Mapping) {
      out.mapping.push_back(name);
      continue;
    }
    const auto it = out.bands.find(*key.resolution);
    if (it == out.bands.end()) {
      throw Error(ErrorKind::Grammar, "parameter '" + name + "' names band " +
                                          std::to_string(*key.resolution) +
                                          " which the config does not have");
    }
    it->second.push_back(name);
  }
  // Input order must not matter.
  std::sort(out.mapping.begin(), out.mapping.end());
  for (auto& [r, list] : out.bands) std::sort(list.begin(), list.end());
  return out;
}

BandPartition partition(const Checkpoint& ckpt) {
  std::vector<std::string> names;
  names.reserve(ckpt.size());
  for (const auto& [name, tensor] : ckpt.params()) names.push_back(name);
  return partition(names, ckpt.meta());
}

}  // namespace ganblend
