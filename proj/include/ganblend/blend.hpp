#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ganblend/checkpoint.hpp"

namespace ganblend {

enum class Donor { Base, Transfer };

// alpha = 1 for r <= r_swap when low_source is Transfer; Base inverts.
struct SwapSchedule {
  int r_swap = 16;
  Donor low_source = Donor::Transfer;
};

// alpha linear in log2(r) from (r_lo, alpha_lo) to (r_hi, alpha_hi), clamped.
struct LinearLogSchedule {
  int r_lo = 4;
  int r_hi = 64;
  float alpha_lo = 0.0f;
  float alpha_hi = 1.0f;
};

// 3t^2 - 2t^3 with t = clamp((log2 r - log2 r_center) / width_octaves + 0.5, 0, 1).
struct SmoothstepSchedule {
  int r_center = 16;
  float width_octaves = 2.0f;
};

struct TableSchedule {
  std::map<int, float> alphas;
};

// Per (band, output channel) alpha; falls back to the band entry in `alphas`.
struct ChannelTableSchedule {
  std::map<int, float> alphas;
  std::map<int, std::map<int, float>> channels;
};

using BlendSchedule = std::variant<SwapSchedule, LinearLogSchedule, SmoothstepSchedule,
                                   TableSchedule, ChannelTableSchedule>;

// How the (resolution independent) mapping network is combined.
struct MappingPolicy {
  enum class Kind { Base, Transfer, Alpha };
  Kind kind = Kind::Base;
  float alpha = 0.0f;

  static MappingPolicy base() { return {}; }
  static MappingPolicy transfer() { return {Kind::Transfer, 1.0f}; }
  static MappingPolicy mix(float a) { return {Kind::Alpha, a}; }
};

// alpha multiplies the transfer parameters: p = (1 - alpha) * base + alpha * transfer.
float alpha_at(const BlendSchedule& schedule, int resolution,
               std::optional<int> channel = std::nullopt);

// Throws Error(Schedule) if any alpha leaves [0, 1], a resolution is not a band
// of `config`, or a band cannot be resolved.
void validate_schedule(const BlendSchedule& schedule, const GeneratorConfig& config);

Checkpoint blend_checkpoints(const Checkpoint& base, const Checkpoint& transfer,
                             const BlendSchedule& schedule,
                             MappingPolicy mapping = MappingPolicy::base());

struct ScheduleRow {
  int resolution;
  float alpha;
};
std::vector<ScheduleRow> describe_schedule(const BlendSchedule& schedule,
                                           const GeneratorConfig& config);

std::string schedule_to_json(const BlendSchedule& schedule);
BlendSchedule schedule_from_json(std::string_view text);

// "base", "transfer" or a number in [0, 1].
MappingPolicy mapping_policy_from_string(std::string_view text);
std::string to_string(const MappingPolicy& policy);

}  // namespace ganblend
