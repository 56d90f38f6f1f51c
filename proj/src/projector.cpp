#include "ganblend/projector.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "ganblend/generator.hpp"
#include "ganblend/rng.hpp"
#include "json.hpp"

namespace ganblend {

std::string_view to_string(LatentSpace space) { return space == LatentSpace::W ? "w" : "z"; }

LatentSpace latent_space_from_string(std::string_view text) {
  if (text == "w" || text == "W") return LatentSpace::W;
  if (text == "z" || text == "Z") return LatentSpace::Z;
  throw Error(ErrorKind::InvalidArgument, "latent space must be 'w' or 'z', got '" +
                                              std::string(text) + "'");
}

void ProjectionConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::InvalidArgument, m); };
  if (steps < 1) fail("projection steps must be >= 1");
  if (!(learning_rate > 0.0f)) fail("learning rate must be > 0");
  if (!(fd_step > 0.0f)) fail("fd_step must be > 0");
  if (!(adam_beta1 >= 0.0f && adam_beta1 < 1.0f) || !(adam_beta2 >= 0.0f && adam_beta2 < 1.0f)) {
    fail("Adam betas must be in [0, 1)");
  }
  if (!(adam_eps > 0.0f)) fail("adam_eps must be > 0");
}

ProjectionConfig projection_config_from_json(std::string_view text) {
  ProjectionConfig cfg;
  try {
    const auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, "projection config must be an object");
    for (const auto& [key, value] : j.items()) {
      if (key == "space") {
        cfg.space = latent_space_from_string(value.get<std::string>());
      } else if (key == "steps") {
        cfg.steps = value.get<int>();
      } else if (key == "learning_rate") {
        cfg.learning_rate = value.get<float>();
      } else if (key == "adam_beta1") {
        cfg.adam_beta1 = value.get<float>();
      } else if (key == "adam_beta2") {
        cfg.adam_beta2 = value.get<float>();
      } else if (key == "adam_eps") {
        cfg.adam_eps = value.get<float>();
      } else if (key == "fd_step") {
        cfg.fd_step = value.get<float>();
      } else if (key == "seed") {
        cfg.seed = value.get<std::uint64_t>();
      } else {
        throw Error(ErrorKind::InvalidArgument, "unknown projection option '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("invalid projection config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

namespace {

constexpr int kMeanLatentSamples = 1024;

// Evaluates fn(i) for i in [0, n) across hardware threads. Each index writes
// its own slot, so results do not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < n; i += workers) fn(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

class Objective {
 public:
  Objective(const Checkpoint& ckpt, const Image& target, LatentSpace space, std::uint64_t seed)
      : ckpt_(ckpt), target_(target), space_(space), net_(ckpt),
        noise_(ckpt.meta(), NoiseSpec{seed}) {}

  Image render(std::span<const float> latent) const {
    if (space_ == LatentSpace::W) return net_.render(latent, noise_);
    return net_.render(map_latent(ckpt_, latent), noise_);
  }

  double loss(std::span<const float> latent) const {
    const auto px = space_ == LatentSpace::W ? net_.render_view(latent, noise_)
                                             : net_.render_view(map_latent(ckpt_, latent), noise_);
    return mean_squared_error(px, target_.pixels().values());
  }

 private:
  const Checkpoint& ckpt_;
  const Image& target_;
  LatentSpace space_;
  Synthesizer net_;
  NoiseBank noise_;
};

void require_finite(double loss, int step, const char* where) {
  if (!std::isfinite(loss)) {
    throw Error(ErrorKind::NonFinite, "projection loss became non-finite at step " +
                                          std::to_string(step) + " (" + where +
                                          "); try a smaller learning rate or fd_step");
  }
}

}  // namespace

std::vector<float> initial_latent(const Checkpoint& ckpt, const ProjectionConfig& cfg) {
  const auto& meta = ckpt.meta();
  if (cfg.space == LatentSpace::Z) return std::vector<float>(meta.latent_dim, 0.0f);

  std::vector<double> sum(meta.style_dim, 0.0);
  KeyedStream stream(cfg.seed, "projector/w_avg");
  std::vector<float> z(meta.latent_dim);
  for (int k = 0; k < kMeanLatentSamples; ++k) {
    for (float& v : z) v = stream.next_normal();
    const auto w = map_latent(ckpt, z);
    for (std::size_t i = 0; i < w.size(); ++i) sum[i] += w[i];
  }
  std::vector<float> mean(meta.style_dim);
  for (std::size_t i = 0; i < mean.size(); ++i) {
    mean[i] = static_cast<float>(sum[i] / kMeanLatentSamples);
  }
  return mean;
}

Image render_latent(const Checkpoint& ckpt, std::span<const float> latent, LatentSpace space,
                    std::uint64_t noise_seed) {
  if (space == LatentSpace::W) return synthesize(ckpt, latent, NoiseSpec{noise_seed});
  return forward(ckpt, latent, NoiseSpec{noise_seed});
}

ProjectionResult project(const Checkpoint& ckpt, const Image& target, const ProjectionConfig& cfg,
                         const ProgressFn& progress) {
  cfg.validate();
  const auto r = static_cast<std::size_t>(ckpt.meta().max_resolution);
  if (target.size() != r) {
    throw Error(ErrorKind::Shape, "target is " + std::to_string(target.size()) + "x" +
                                      std::to_string(target.size()) + " but the model renders " +
                                      std::to_string(r) + "x" + std::to_string(r));
  }

  const Objective objective(ckpt, target, cfg.space, cfg.seed);
  std::vector<float> x = initial_latent(ckpt, cfg);
  const std::size_t dim = x.size();

  std::vector<double> m(dim, 0.0), v(dim, 0.0), grad(dim, 0.0);
  std::vector<double> probe(2 * dim);
  std::vector<float> best = x;
  double best_loss = std::numeric_limits<double>::infinity();

  ProjectionResult result;
  result.space = cfg.space;
  result.loss_trace.reserve(cfg.steps);

  double b1_pow = 1.0, b2_pow = 1.0;
  for (int step = 0; step < cfg.steps; ++step) {
    const double loss = objective.loss(x);
    require_finite(loss, step, "current latent");
    result.loss_trace.push_back(static_cast<float>(loss));
    if (loss < best_loss) {
      best_loss = loss;
      best = x;
    }

    parallel_for(2 * dim, [&](std::size_t k) {
      const std::size_t i = k / 2;
      const double h = static_cast<double>(cfg.fd_step) * (1.0 + std::abs(x[i]));
      std::vector<float> xp = x;
      xp[i] = static_cast<float>(x[i] + ((k % 2 == 0) ? h : -h));
      probe[k] = objective.loss(xp);
    });
    for (std::size_t i = 0; i < dim; ++i) {
      require_finite(probe[2 * i], step, "gradient probe");
      require_finite(probe[2 * i + 1], step, "gradient probe");
      // Divide by the realized step so rounding of x +- h in f32 is accounted for.
      const double h = static_cast<double>(cfg.fd_step) * (1.0 + std::abs(x[i]));
      const double hp = static_cast<double>(static_cast<float>(x[i] + h)) - x[i];
      const double hm = x[i] - static_cast<double>(static_cast<float>(x[i] - h));
      grad[i] = (probe[2 * i] - probe[2 * i + 1]) / (hp + hm);
    }

    b1_pow *= cfg.adam_beta1;
    b2_pow *= cfg.adam_beta2;
    for (std::size_t i = 0; i < dim; ++i) {
      m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * grad[i];
      v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / (1.0 - b1_pow);
      const double v_hat = v[i] / (1.0 - b2_pow);
      x[i] = static_cast<float>(x[i] - cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps));
    }
    if (progress) progress(step, loss);
  }

  const double last = objective.loss(x);
  require_finite(last, cfg.steps, "final latent");
  if (last < best_loss) {
    best_loss = last;
    best = x;
  }

  result.latent = best;
  result.reconstruction = objective.render(best);
  result.final_loss = mean_squared_error(result.reconstruction, target);
  return result;
}

ToonifyResult toonify_detailed(const Checkpoint& base, const Checkpoint& blended,
                               const Image& target, const ProjectionConfig& cfg,
                               const ProgressFn& progress) {
  if (!(base.meta() == blended.meta())) {
    throw Error(ErrorKind::Config, "base and blended checkpoints have different configs");
  }
  auto projection = project(base, target, cfg, progress);
  Image image = render_latent(blended, projection.latent, cfg.space, cfg.seed);
  return {std::move(projection), std::move(image)};
}

Image toonify(const Checkpoint& base, const Checkpoint& blended, const Image& target,
              const ProjectionConfig& cfg) {
  return toonify_detailed(base, blended, target, cfg).image;
}

std::string latent_to_json(const ProjectionResult& result, std::string_view model_id) {
  nlohmann::json j = {{"space", std::string(to_string(result.space))},
                      {"values", result.latent},
                      {"final_loss", result.final_loss},
                      {"model_id", std::string(model_id)}};
  return j.dump();
}

}  // namespace ganblend
