#include "ganblend/generator.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string_view>

#include "conv_kernels.hpp"
#include "ganblend/rng.hpp"
#include "ganblend/topology.hpp"

namespace ganblend {

NoiseBank::NoiseBank(const GeneratorConfig& config, NoiseSpec spec) : seed_(spec.seed) {
  for (const auto& p : manifest(config)) {
    const auto key = classify(p.name);
    if (key.role != Role::NoiseStrength) continue;
    const auto r = static_cast<std::size_t>(*key.resolution);
    Tensor plane({1, r, r});
    KeyedStream stream(spec.seed, "noise/" + p.name);
    for (float& v : plane.values()) v = stream.next_normal();
    planes_.emplace(p.name, std::move(plane));
  }
}

const Tensor& NoiseBank::plane(const std::string& noise_param) const {
  const auto it = planes_.find(noise_param);
  if (it == planes_.end()) {
    throw Error(ErrorKind::NotFound, "no noise plane for '" + noise_param + "'");
  }
  return it->second;
}

std::vector<float> map_latent(const Checkpoint& ckpt, std::span<const float> z) {
  const auto& cfg = ckpt.meta();
  if (z.size() != static_cast<std::size_t>(cfg.latent_dim)) {
    throw Error(ErrorKind::Shape, "latent z has length " + std::to_string(z.size()) +
                                      ", config expects " + std::to_string(cfg.latent_dim));
  }
  std::vector<float> x(z.begin(), z.end());
  for (int i = 0; i < cfg.mapping_layers; ++i) {
    x = linear(x, ckpt.param(mapping_param(i, "weight")), ckpt.param(mapping_param(i, "bias")));
    for (float& v : x) v = v >= 0.0f ? kDefaultLeakyGain * v : kDefaultLeakyGain * kDefaultLeakySlope * v;
  }
  return x;
}

namespace {

struct Layer {
  int ci = 0;
  int co = 0;
  int k = 0;
  std::vector<float> packed;  // [Ci][k*k][Co]
  std::vector<float> sq;      // [Co][Ci], empty when not demodulated
  const Tensor* affine_w = nullptr;
  const Tensor* affine_b = nullptr;
  std::vector<float> bias;
  float noise_strength = 0.0f;
  std::string noise_name;  // empty for ToRGB
};

struct Band {
  int r = 0;
  std::optional<Layer> conv0;
  Layer conv1;
  Layer torgb;
};

Layer make_layer(const Checkpoint& ckpt, int r, const char* name) {
  const bool rgb = std::string_view(name) == "torgb";
  const Tensor& weight = ckpt.param(synthesis_param(r, name, "weight"));
  Layer layer;
  layer.co = static_cast<int>(weight.dim(0));
  layer.ci = static_cast<int>(weight.dim(1));
  layer.k = static_cast<int>(weight.dim(2));
  layer.packed.resize(weight.size());
  detail::pack_conv_weight(weight.data(), layer.co, layer.ci, layer.k, layer.packed.data());
  if (!rgb) {
    layer.sq.resize(static_cast<std::size_t>(layer.co) * layer.ci);
    detail::conv_weight_sq(weight.data(), layer.co, layer.ci, layer.k, layer.sq.data());
    layer.noise_name = synthesis_param(r, name, "noise_strength");
    layer.noise_strength = ckpt.param(layer.noise_name)[0];
  }
  layer.affine_w = &ckpt.param(synthesis_param(r, name, "affine_weight"));
  layer.affine_b = &ckpt.param(synthesis_param(r, name, "affine_bias"));
  const auto bias = ckpt.param(synthesis_param(r, name, "bias")).values();
  layer.bias.assign(bias.begin(), bias.end());
  return layer;
}

struct Scratch {
  std::vector<float> pad, x, y, rgb, rgb_next, scale, weights;
};

Scratch& scratch() {
  thread_local Scratch s;
  return s;
}

void check_finite(const std::vector<float>& v, std::size_t n, int r, const char* layer) {
  if (!detail::all_finite(v.data(), n)) {
    throw Error(ErrorKind::NonFinite, "non-finite activations in synthesis.b" +
                                          std::to_string(r) + "." + layer);
  }
}

}  // namespace

struct Synthesizer::Impl {
  Checkpoint ckpt;  // keeps the referenced affine tensors alive
  std::vector<Band> bands;

  explicit Impl(const Checkpoint& c) : ckpt(c) {
    for (int r : ckpt.meta().bands()) {
      Band band;
      band.r = r;
      if (r > 4) band.conv0 = make_layer(ckpt, r, "conv0");
      band.conv1 = make_layer(ckpt, r, "conv1");
      band.torgb = make_layer(ckpt, r, "torgb");
      bands.push_back(std::move(band));
    }
  }

  // Modulated 3x3 conv + noise + bias + activation; reads s.x, writes s.y.
  void styled_conv(const Layer& layer, std::span<const float> w, const NoiseBank& noise, int r,
                   bool upsample, Scratch& s) const {
    const auto style = linear(w, *layer.affine_w, *layer.affine_b);
    s.scale.resize(layer.co);
    detail::demod_scale(layer.sq.data(), layer.co, layer.ci, style.data(),
                        kDefaultDemodEpsilon, s.scale.data());
    detail::fill_padded(s.x.data(), layer.ci, r, r, layer.k / 2, style.data(), upsample, s.pad);
    detail::Epilogue epi;
    epi.scale = s.scale.data();
    epi.bias = layer.bias.data();
    epi.noise = noise.plane(layer.noise_name).data();
    epi.noise_strength = layer.noise_strength;
    epi.activate = true;
    s.y.resize(static_cast<std::size_t>(layer.co) * r * r);
    detail::conv_padded(s.pad.data(), layer.ci, r, r, layer.k, layer.packed.data(), layer.co,
                        epi, s.y.data());
  }

  // Returns true when stopped at tap_r (features left in s.x).
  bool run(std::span<const float> w, const NoiseBank& noise, std::optional<int> tap_r,
           Scratch& s) const {
    const auto& cfg = ckpt.meta();
    if (w.size() != static_cast<std::size_t>(cfg.style_dim)) {
      throw Error(ErrorKind::Shape, "style vector w has length " + std::to_string(w.size()) +
                                        ", config expects " + std::to_string(cfg.style_dim));
    }
    if (tap_r && !cfg.has_band(*tap_r)) {
      throw Error(ErrorKind::InvalidArgument, "tap resolution " + std::to_string(*tap_r) +
                                                  " is not a band of this model");
    }
    const auto c4 = ckpt.param(synthesis_param(4, "const", "")).values();
    s.x.assign(c4.begin(), c4.end());
    for (const Band& band : bands) {
      const int r = band.r;
      const std::size_t hw = static_cast<std::size_t>(r) * r;
      if (band.conv0) {
        styled_conv(*band.conv0, w, noise, r, true, s);
        check_finite(s.y, s.y.size(), r, "conv0");
        std::swap(s.x, s.y);
      }
      styled_conv(band.conv1, w, noise, r, false, s);
      check_finite(s.y, s.y.size(), r, "conv1");
      std::swap(s.x, s.y);
      if (tap_r && *tap_r == r) return true;

      // ToRGB: 1x1, modulated but not demodulated, summed onto the upsampled skip.
      const Layer& t = band.torgb;
      const auto style = linear(w, *t.affine_w, *t.affine_b);
      s.weights.resize(t.packed.size());
      for (int i = 0; i < t.ci; ++i) {
        for (int c = 0; c < t.co; ++c) {
          s.weights[i * t.co + c] = style[i] * t.packed[i * t.co + c];
        }
      }
      detail::Epilogue epi;
      epi.bias = t.bias.data();
      s.rgb_next.resize(static_cast<std::size_t>(t.co) * hw);
      detail::conv_pointwise(s.x.data(), t.ci, r, r, s.weights.data(), t.co, epi,
                             s.rgb_next.data());
      if (r > 4) {
        const int half = r / 2;
        for (int c = 0; c < t.co; ++c) {
          float* dst = s.rgb_next.data() + c * hw;
          const float* src = s.rgb.data() + static_cast<std::size_t>(c) * half * half;
          for (int y = 0; y < r; ++y) {
            for (int x = 0; x < r; ++x) dst[y * r + x] += src[(y / 2) * half + x / 2];
          }
        }
      }
      check_finite(s.rgb_next, s.rgb_next.size(), r, "torgb");
      std::swap(s.rgb, s.rgb_next);
    }
    return false;
  }
};

Synthesizer::Synthesizer(const Checkpoint& ckpt) : impl_(std::make_unique<Impl>(ckpt)) {}
Synthesizer::~Synthesizer() = default;
Synthesizer::Synthesizer(Synthesizer&&) noexcept = default;
Synthesizer& Synthesizer::operator=(Synthesizer&&) noexcept = default;

const GeneratorConfig& Synthesizer::config() const noexcept { return impl_->ckpt.meta(); }

std::span<const float> Synthesizer::render_view(std::span<const float> w,
                                               const NoiseBank& noise) const {
  auto& s = scratch();
  impl_->run(w, noise, std::nullopt, s);
  const auto r = static_cast<std::size_t>(config().max_resolution);
  return {s.rgb.data(), 3 * r * r};
}

Image Synthesizer::render(std::span<const float> w, const NoiseBank& noise) const {
  const auto px = render_view(w, noise);
  const auto r = static_cast<std::size_t>(config().max_resolution);
  return Image(Tensor({3, r, r}, std::vector<float>(px.begin(), px.end())));
}

Tensor Synthesizer::tap(std::span<const float> w, const NoiseBank& noise, int tap_r) const {
  auto& s = scratch();
  impl_->run(w, noise, tap_r, s);
  const auto r = static_cast<std::size_t>(tap_r);
  const std::size_t c = static_cast<std::size_t>(config().channels(tap_r));
  return Tensor({c, r, r}, std::vector<float>(s.x.begin(), s.x.begin() + c * r * r));
}

Image synthesize(const Checkpoint& ckpt, std::span<const float> w, const NoiseBank& noise) {
  return Synthesizer(ckpt).render(w, noise);
}

Image synthesize(const Checkpoint& ckpt, std::span<const float> w, NoiseSpec noise) {
  return synthesize(ckpt, w, NoiseBank(ckpt.meta(), noise));
}

Image forward(const Checkpoint& ckpt, std::span<const float> z, NoiseSpec noise) {
  const auto w = map_latent(ckpt, z);
  return synthesize(ckpt, w, noise);
}

Tensor activations_from_w(const Checkpoint& ckpt, std::span<const float> w, NoiseSpec noise,
                          int tap_r) {
  return Synthesizer(ckpt).tap(w, NoiseBank(ckpt.meta(), noise), tap_r);
}

Tensor activations(const Checkpoint& ckpt, std::span<const float> z, NoiseSpec noise,
                   int tap_r) {
  return activations_from_w(ckpt, map_latent(ckpt, z), noise, tap_r);
}

std::vector<float> sample_latent(const GeneratorConfig& config, std::uint64_t seed,
                                 std::size_t index) {
  KeyedStream stream(seed, "z/" + std::to_string(index));
  std::vector<float> z(static_cast<std::size_t>(config.latent_dim));
  for (float& v : z) v = stream.next_normal();
  return z;
}

Checkpoint init_random(const GeneratorConfig& config, std::uint64_t seed) {
  ParamMap params;
  for (const auto& spec : manifest(config)) {
    Tensor t(spec.shape);
    const auto role = classify(spec.name).role;
    std::optional<double> stddev;
    switch (role) {
      case Role::Const: stddev = 1.0; break;
      case Role::MapWeight:
      case Role::StyleAffineWeight: stddev = 1.0 / std::sqrt(static_cast<double>(spec.shape[1])); break;
      case Role::ConvWeight:
      case Role::ToRgbWeight:
        stddev = 1.0 / std::sqrt(static_cast<double>(spec.shape[1] * spec.shape[2] * spec.shape[3]));
        break;
      default: break;  // biases, noise strengths stay 0
    }
    if (stddev) {
      KeyedStream stream(seed, "init/" + spec.name);
      for (float& v : t.values()) v = static_cast<float>(*stddev * stream.next_normal());
    }
    params.emplace(spec.name, std::move(t));
  }
  return Checkpoint(config, std::move(params));
}

Checkpoint synth_transfer(const Checkpoint& base, float strength, std::uint64_t seed) {
  if (!(strength >= 0.0f) || !std::isfinite(strength)) {
    throw Error(ErrorKind::InvalidArgument, "transfer strength must be finite and >= 0");
  }
  if (strength == 0.0f) return base;

  ParamMap params;
  for (const auto& [name, tensor] : base.params()) {
    double mean = 0.0;
    for (float v : tensor.values()) mean += v;
    mean /= static_cast<double>(tensor.size());
    double var = 0.0;
    for (float v : tensor.values()) var += (v - mean) * (v - mean);
    const double sigma = std::max(std::sqrt(var / static_cast<double>(tensor.size())), 1e-3);

    const bool mapping = classify(name).stage == Stage::Mapping;
    const double scale = (mapping ? 0.01 : 1.0) * strength * sigma;
    Tensor t = tensor;
    KeyedStream stream(seed, "transfer/" + name);
    for (float& v : t.values()) v = static_cast<float>(v + scale * stream.next_normal());
    params.emplace(name, std::move(t));
  }
  return Checkpoint(base.meta(), std::move(params));
}

}  // namespace ganblend
