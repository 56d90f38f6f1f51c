#include "ganblend/blend.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "ganblend/topology.hpp"
#include "json.hpp"

namespace ganblend {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

[[noreturn]] void schedule_error(const std::string& msg) {
  throw Error(ErrorKind::Schedule, msg);
}

float table_lookup(const std::map<int, float>& alphas, int r) {
  const auto it = alphas.find(r);
  if (it == alphas.end()) schedule_error("schedule has no alpha for band " + std::to_string(r));
  return it->second;
}

}  // namespace

float alpha_at(const BlendSchedule& schedule, int r, std::optional<int> channel) {
  const double lr = std::log2(static_cast<double>(r));
  return std::visit(
      overloaded{
          [&](const SwapSchedule& s) {
            const bool low = r <= s.r_swap;
            return (low == (s.low_source == Donor::Transfer)) ? 1.0f : 0.0f;
          },
          [&](const LinearLogSchedule& s) {
            const double lo = std::log2(static_cast<double>(s.r_lo));
            const double hi = std::log2(static_cast<double>(s.r_hi));
            const double t = std::clamp((lr - lo) / (hi - lo), 0.0, 1.0);
            return static_cast<float>(s.alpha_lo + t * (static_cast<double>(s.alpha_hi) - s.alpha_lo));
          },
          [&](const SmoothstepSchedule& s) {
            const double c = std::log2(static_cast<double>(s.r_center));
            const double t = std::clamp((lr - c) / s.width_octaves + 0.5, 0.0, 1.0);
            return static_cast<float>(t * t * (3.0 - 2.0 * t));
          },
          [&](const TableSchedule& s) { return table_lookup(s.alphas, r); },
          [&](const ChannelTableSchedule& s) {
            if (channel) {
              if (const auto band = s.channels.find(r); band != s.channels.end()) {
                if (const auto it = band->second.find(*channel); it != band->second.end()) {
                  return it->second;
                }
              }
            }
            return table_lookup(s.alphas, r);
          },
      },
      schedule);
}

void validate_schedule(const BlendSchedule& schedule, const GeneratorConfig& config) {
  auto check_band = [&](int r, const char* what) {
    if (!config.has_band(r)) {
      schedule_error(std::string(what) + " = " + std::to_string(r) +
                     " is not a valid band (bands are powers of two from 4 to " +
                     std::to_string(config.max_resolution) + ")");
    }
  };
  auto check_alpha = [](float a, const std::string& what) {
    if (!(a >= 0.0f && a <= 1.0f)) {
      schedule_error(what + " = " + std::to_string(a) + " is outside [0, 1]");
    }
  };
  auto check_table = [&](const std::map<int, float>& alphas) {
    for (const auto& [r, a] : alphas) {
      check_band(r, "table resolution");
      check_alpha(a, "alpha at band " + std::to_string(r));
    }
    for (int r : config.bands()) {
      if (!alphas.contains(r)) schedule_error("schedule has no alpha for band " + std::to_string(r));
    }
  };

  std::visit(overloaded{
                 [&](const SwapSchedule& s) { check_band(s.r_swap, "r_swap"); },
                 [&](const LinearLogSchedule& s) {
                   check_band(s.r_lo, "r_lo");
                   check_band(s.r_hi, "r_hi");
                   if (s.r_lo >= s.r_hi) schedule_error("linear_log requires r_lo < r_hi");
                   check_alpha(s.alpha_lo, "alpha_lo");
                   check_alpha(s.alpha_hi, "alpha_hi");
                 },
                 [&](const SmoothstepSchedule& s) {
                   check_band(s.r_center, "r_center");
                   if (!(s.width_octaves > 0.0f) || !std::isfinite(s.width_octaves)) {
                     schedule_error("smoothstep width_octaves must be positive");
                   }
                 },
                 [&](const TableSchedule& s) { check_table(s.alphas); },
                 [&](const ChannelTableSchedule& s) {
                   check_table(s.alphas);
                   for (const auto& [r, per_channel] : s.channels) {
                     check_band(r, "channel_table resolution");
                     for (const auto& [c, a] : per_channel) {
                       if (c < 0 || c >= config.channels(r)) {
                         schedule_error("channel " + std::to_string(c) + " out of range for band " +
                                        std::to_string(r));
                       }
                       check_alpha(a, "alpha at band " + std::to_string(r) + " channel " +
                                          std::to_string(c));
                     }
                   }
                 },
             },
             schedule);
}

namespace {

// alpha in {0, 1} copies the donor untouched; otherwise the convex combination
// is evaluated in double and rounded once to f32.
void mix_into(std::span<float> out, std::span<const float> base, std::span<const float> transfer,
              float alpha) {
  if (alpha == 0.0f) {
    std::copy(base.begin(), base.end(), out.begin());
  } else if (alpha == 1.0f) {
    std::copy(transfer.begin(), transfer.end(), out.begin());
  } else {
    const double a = alpha;
    const double b = 1.0 - a;
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = static_cast<float>(b * base[i] + a * transfer[i]);
    }
  }
}

bool channel_indexed(Role role) {
  return role == Role::ConvWeight || role == Role::ConvBias || role == Role::ToRgbWeight ||
         role == Role::ToRgbBias;
}

}  // namespace

Checkpoint blend_checkpoints(const Checkpoint& base, const Checkpoint& transfer,
                             const BlendSchedule& schedule, MappingPolicy mapping) {
  if (!(base.meta() == transfer.meta())) {
    throw Error(ErrorKind::Config, "base and transfer checkpoints have different configs");
  }
  if (mapping.kind == MappingPolicy::Kind::Alpha && !(mapping.alpha >= 0.0f && mapping.alpha <= 1.0f)) {
    throw Error(ErrorKind::Schedule, "mapping alpha must be in [0, 1]");
  }
  validate_schedule(schedule, base.meta());
  const bool per_channel = std::holds_alternative<ChannelTableSchedule>(schedule);

  ParamMap out;
  auto it_t = transfer.params().begin();
  for (const auto& [name, tb] : base.params()) {
    const auto& [tname, tt] = *it_t++;
    if (name != tname || tb.dims() != tt.dims()) {
      throw Error(ErrorKind::Manifest, "manifest mismatch at '" + name + "'");
    }
    const auto key = classify(name);
    Tensor result(tb.dims());

    if (key.stage == Stage::Mapping) {
      const float a = mapping.kind == MappingPolicy::Kind::Base       ? 0.0f
                      : mapping.kind == MappingPolicy::Kind::Transfer ? 1.0f
                                                                      : mapping.alpha;
      mix_into(result.values(), tb.values(), tt.values(), a);
    } else if (per_channel && channel_indexed(key.role)) {
      const std::size_t slice = tb.size() / tb.dim(0);
      for (std::size_t c = 0; c < tb.dim(0); ++c) {
        const float a = alpha_at(schedule, *key.resolution, static_cast<int>(c));
        mix_into(result.values().subspan(c * slice, slice),
                 tb.values().subspan(c * slice, slice), tt.values().subspan(c * slice, slice), a);
      }
    } else {
      mix_into(result.values(), tb.values(), tt.values(), alpha_at(schedule, *key.resolution));
    }
    out.emplace(name, std::move(result));
  }
  return Checkpoint(base.meta(), std::move(out));
}

std::vector<ScheduleRow> describe_schedule(const BlendSchedule& schedule,
                                           const GeneratorConfig& config) {
  validate_schedule(schedule, config);
  std::vector<ScheduleRow> rows;
  for (int r : config.bands()) rows.push_back({r, alpha_at(schedule, r)});
  return rows;
}

// ---------------------------------------------------------------------------

namespace {

json alphas_to_json(const std::map<int, float>& alphas) {
  json j = json::object();
  for (const auto& [r, a] : alphas) j[std::to_string(r)] = a;
  return j;
}

int parse_int_key(const std::string& key) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), v);
  if (ec != std::errc() || ptr != key.data() + key.size()) {
    schedule_error("'" + key + "' is not an integer key");
  }
  return v;
}

std::map<int, float> alphas_from_json(const json& j) {
  std::map<int, float> out;
  for (const auto& [key, value] : j.items()) out[parse_int_key(key)] = value.get<float>();
  return out;
}

Donor donor_from_string(const std::string& s) {
  if (s == "transfer") return Donor::Transfer;
  if (s == "base") return Donor::Base;
  schedule_error("low_source must be 'base' or 'transfer', got '" + s + "'");
}

}  // namespace

std::string schedule_to_json(const BlendSchedule& schedule) {
  const json j = std::visit(
      overloaded{
          [](const SwapSchedule& s) {
            return json{{"kind", "swap"},
                        {"r_swap", s.r_swap},
                        {"low_source", s.low_source == Donor::Transfer ? "transfer" : "base"}};
          },
          [](const LinearLogSchedule& s) {
            return json{{"kind", "linear_log"}, {"r_lo", s.r_lo}, {"r_hi", s.r_hi},
                        {"alpha_lo", s.alpha_lo}, {"alpha_hi", s.alpha_hi}};
          },
          [](const SmoothstepSchedule& s) {
            return json{{"kind", "smoothstep"}, {"r_center", s.r_center},
                        {"width_octaves", s.width_octaves}};
          },
          [](const TableSchedule& s) {
            return json{{"kind", "table"}, {"alphas", alphas_to_json(s.alphas)}};
          },
          [](const ChannelTableSchedule& s) {
            json channels = json::object();
            for (const auto& [r, per] : s.channels) channels[std::to_string(r)] = alphas_to_json(per);
            return json{{"kind", "channel_table"},
                        {"alphas", alphas_to_json(s.alphas)},
                        {"channels", channels}};
          },
      },
      schedule);
  return j.dump();
}

BlendSchedule schedule_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "swap") {
      return SwapSchedule{j.at("r_swap").get<int>(),
                          donor_from_string(j.value("low_source", std::string("transfer")))};
    }
    if (kind == "linear_log") {
      return LinearLogSchedule{j.at("r_lo").get<int>(), j.at("r_hi").get<int>(),
                               j.value("alpha_lo", 0.0f), j.value("alpha_hi", 1.0f)};
    }
    if (kind == "smoothstep") {
      return SmoothstepSchedule{j.at("r_center").get<int>(), j.value("width_octaves", 2.0f)};
    }
    if (kind == "table") return TableSchedule{alphas_from_json(j.at("alphas"))};
    if (kind == "channel_table") {
      ChannelTableSchedule s{alphas_from_json(j.at("alphas")), {}};
      if (j.contains("channels")) {
        for (const auto& [key, per] : j.at("channels").items()) {
          s.channels[parse_int_key(key)] = alphas_from_json(per);
        }
      }
      return s;
    }
    schedule_error("unknown schedule kind '" + kind + "'");
  } catch (const json::exception& e) {
    schedule_error(std::string("invalid schedule JSON: ") + e.what());
  }
}

MappingPolicy mapping_policy_from_string(std::string_view text) {
  if (text == "base") return MappingPolicy::base();
  if (text == "transfer") return MappingPolicy::transfer();
  float a = 0.0f;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), a);
  if (ec != std::errc() || ptr != text.data() + text.size() || !(a >= 0.0f && a <= 1.0f)) {
    throw Error(ErrorKind::Schedule, "mapping must be 'base', 'transfer' or a number in [0, 1], got '" +
                                         std::string(text) + "'");
  }
  return MappingPolicy::mix(a);
}

std::string to_string(const MappingPolicy& policy) {
  switch (policy.kind) {
    case MappingPolicy::Kind::Base: return "base";
    case MappingPolicy::Kind::Transfer: return "transfer";
    case MappingPolicy::Kind::Alpha: return std::to_string(policy.alpha);
  }
  return "base";
}

}  // namespace ganblend
