#include <gtest/gtest.h>

#include <cmath>

#include "ganblend/blend.hpp"
#include "ganblend/projector.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace ganblend;

namespace {

const Checkpoint& small_model() {
  static const Checkpoint c = init_random(testutil::small_config(), 2);
  return c;
}

Image small_target(std::uint64_t seed) {
  const auto z = sample_latent(small_model().meta(), seed, 0);
  return forward(small_model(), z, NoiseSpec{0});
}

ProjectionConfig quick(int steps, float lr = 0.05f) {
  ProjectionConfig cfg;
  cfg.steps = steps;
  cfg.learning_rate = lr;
  return cfg;
}

}  // namespace

TEST(ProjectionConfig, Validation) {
  EXPECT_NO_THROW(ProjectionConfig{}.validate());
  auto c = ProjectionConfig{};
  c.steps = 0;
  EXPECT_THROW(c.validate(), Error);
  c = ProjectionConfig{};
  c.learning_rate = 0.0f;
  EXPECT_THROW(c.validate(), Error);
  c = ProjectionConfig{};
  c.fd_step = -1e-3f;
  EXPECT_THROW(c.validate(), Error);
}

TEST(ProjectionConfig, FromJson) {
  const auto c = projection_config_from_json(R"({"space":"z","steps":7,"learning_rate":0.1,"seed":3})");
  EXPECT_EQ(c.space, LatentSpace::Z);
  EXPECT_EQ(c.steps, 7);
  EXPECT_FLOAT_EQ(c.learning_rate, 0.1f);
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(projection_config_from_json("{}").steps, 300);
  EXPECT_THROW(projection_config_from_json(R"({"stepz":3})"), Error);
  EXPECT_THROW(projection_config_from_json(R"({"steps":0})"), Error);
  EXPECT_THROW(projection_config_from_json("nope"), Error);
  EXPECT_THROW(latent_space_from_string("x"), Error);
}

TEST(Project, TraceLengthAndBestSoFar) {
  const auto target = small_target(5);
  const auto one = project(small_model(), target, quick(1));
  EXPECT_EQ(one.loss_trace.size(), 1u);
  const auto r = project(small_model(), target, quick(25));
  ASSERT_EQ(r.loss_trace.size(), 25u);
  EXPECT_LE(r.final_loss, r.loss_trace.front());
  for (float l : r.loss_trace) EXPECT_LE(static_cast<float>(r.final_loss), l);
  EXPECT_DOUBLE_EQ(r.final_loss, mean_squared_error(r.reconstruction, target));
  EXPECT_EQ(r.latent.size(), 6u);
  EXPECT_LT(r.final_loss, 0.5 * r.loss_trace.front());
}

TEST(Project, Deterministic) {
  const auto target = small_target(6);
  const auto a = project(small_model(), target, quick(10));
  const auto b = project(small_model(), target, quick(10));
  EXPECT_EQ(a.latent, b.latent);
  EXPECT_EQ(a.loss_trace, b.loss_trace);
  EXPECT_TRUE(bit_equal(a.reconstruction.pixels(), b.reconstruction.pixels()));
}

TEST(Project, StartsFromMeanMappedLatent) {
  ProjectionConfig cfg;
  const auto w0 = initial_latent(small_model(), cfg);
  KeyedStream s(0, "projector/w_avg");
  std::vector<double> mean(6, 0.0);
  std::vector<float> z(8);
  for (int k = 0; k < 1024; ++k) {
    for (float& v : z) v = s.next_normal();
    const auto w = testutil::ref_mapping(small_model(), z);
    for (int i = 0; i < 6; ++i) mean[i] += w[i] / 1024.0;
  }
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(w0[i], mean[i], 1e-5);
  cfg.space = LatentSpace::Z;
  EXPECT_EQ(initial_latent(small_model(), cfg), std::vector<float>(8, 0.0f));
}

// One Adam step from zero moments moves every coordinate by lr * g / (|g| + eps).
TEST(Project, FirstStepIsBoundedByLearningRate) {
  const auto target = small_target(8);
  const auto x0 = initial_latent(small_model(), ProjectionConfig{});
  for (float lr : {1e-3f, 1e-4f}) {
    const auto r = project(small_model(), target, quick(1, lr));
    ASSERT_EQ(r.latent.size(), x0.size());
    double moved = 0;
    for (std::size_t i = 0; i < x0.size(); ++i) {
      const double d = std::fabs(double(r.latent[i]) - x0[i]);
      EXPECT_LE(d, lr * 1.01 + 1e-7);
      moved += d;
    }
    if (r.final_loss < r.loss_trace[0]) EXPECT_NEAR(moved / x0.size(), lr, 0.02 * lr);
  }
}

TEST(Project, ZSpaceRuns) {
  auto cfg = quick(15);
  cfg.space = LatentSpace::Z;
  const auto r = project(small_model(), small_target(9), cfg);
  EXPECT_EQ(r.latent.size(), 8u);
  EXPECT_EQ(r.space, LatentSpace::Z);
  EXPECT_TRUE(bit_equal(r.reconstruction.pixels(),
                        render_latent(small_model(), r.latent, LatentSpace::Z, 0).pixels()));
}

TEST(Project, RejectsWrongTargetSize) {
  try {
    project(small_model(), Image::filled(8, 0.0f), quick(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Shape);
  }
}

// Demodulation cancels the scale of w, so even huge steps keep the loss finite.
TEST(Project, HugeLearningRateStaysFinite) {
  const auto r = project(small_model(), small_target(1), quick(5, 1e30f));
  EXPECT_TRUE(std::isfinite(r.final_loss));
}

TEST(Project, NonFiniteModelAborts) {
  ParamMap params = small_model().params();
  params.at("synthesis.b16.torgb.bias")[0] = INFINITY;
  const Checkpoint broken(small_model().meta(), std::move(params));
  try {
    project(broken, small_target(1), quick(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFinite);
  }
}

TEST(Toonify, SameModelReturnsReconstruction) {
  const auto target = small_target(3);
  const auto out = toonify_detailed(small_model(), small_model(), target, quick(5));
  EXPECT_TRUE(bit_equal(out.image.pixels(), out.projection.reconstruction.pixels()));
  EXPECT_EQ(out.image.size(), target.size());
}

TEST(Toonify, SwapBlendChangesOutputButNotMapping) {
  const auto transfer = synth_transfer(small_model(), 0.5f, 1);
  const auto blended = blend_checkpoints(small_model(), transfer, SwapSchedule{8, Donor::Transfer});
  const auto target = small_target(4);
  const auto out = toonify_detailed(small_model(), blended, target, quick(5));
  EXPECT_FALSE(bit_equal(out.image.pixels(), out.projection.reconstruction.pixels()));
  const auto again = toonify(small_model(), blended, target, quick(5));
  EXPECT_TRUE(bit_equal(out.image.pixels(), again.pixels()));

  const auto z = sample_latent(small_model().meta(), 0, 0);
  EXPECT_EQ(map_latent(small_model(), z), map_latent(blended, z));
  const auto& w = out.projection.latent;
  for (int r : {4, 8}) {
    EXPECT_FALSE(bit_equal(activations_from_w(small_model(), w, NoiseSpec{0}, r),
                           activations_from_w(blended, w, NoiseSpec{0}, r)));
  }
}

TEST(Toonify, WSpaceBypassesMapping) {
  const auto r = project(small_model(), small_target(2), quick(3));
  ParamMap params = small_model().params();
  for (float& v : params.at("mapping.fc0.weight").values()) v *= -3.0f;
  const Checkpoint remapped(small_model().meta(), std::move(params));
  EXPECT_TRUE(bit_equal(render_latent(remapped, r.latent, LatentSpace::W, 0).pixels(),
                        render_latent(small_model(), r.latent, LatentSpace::W, 0).pixels()));
}

TEST(Toonify, RejectsConfigMismatch) {
  EXPECT_THROW(toonify(small_model(), testutil::base_fixture(), small_target(0), quick(1)), Error);
}

TEST(LatentJson, Shape) {
  ProjectionResult r;
  r.latent = {0.5f, -1.0f};
  r.final_loss = 0.25;
  const auto j = nlohmann::json::parse(latent_to_json(r, "m7"));
  EXPECT_EQ(j.at("space"), "w");
  EXPECT_EQ(j.at("values").size(), 2u);
  EXPECT_EQ(j.at("final_loss"), 0.25);
  EXPECT_EQ(j.at("model_id"), "m7");
}
