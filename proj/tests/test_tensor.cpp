#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "ganblend/tensor.hpp"
#include "test_util.hpp"

using namespace ganblend;
using testutil::random_values;

namespace {

Tensor random_tensor(Shape dims, std::uint64_t seed, const char* name, float scale = 1.0f) {
  const auto n = shape_volume(dims);
  return Tensor(std::move(dims), random_values(n, seed, name, scale));
}

double max_rel_error(const Tensor& got, const std::vector<double>& want) {
  double scale = 0.0, err = 0.0;
  for (std::size_t i = 0; i < want.size(); ++i) {
    scale = std::max(scale, std::fabs(want[i]));
    err = std::max(err, std::fabs(got[i] - want[i]));
  }
  return scale > 0 ? err / scale : err;
}

}  // namespace

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Tensor(Shape{}), Error);
  EXPECT_THROW(Tensor(Shape{2, 0}), Error);
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<float>(3)), Error);
  const Tensor t({2, 3});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rank(), 2u);
}

TEST(Tensor, BitEqualSeesSignedZero) {
  const Tensor a({1}, {0.0f});
  const Tensor b({1}, {-0.0f});
  EXPECT_FALSE(bit_equal(a, b));
  EXPECT_TRUE(bit_equal(a, a));
}

TEST(Conv, ZeroInputGivesZeroOutput) {
  const Tensor x({2, 5, 5});
  const auto w = random_tensor({3, 2, 3, 3}, 1, "w");
  const std::vector<float> style{0.7f, -1.3f};
  const auto y = conv2d_modulated(x, w, style);
  for (float v : y.values()) EXPECT_EQ(v, 0.0f);
}

TEST(Conv, DemodDivisorForUnitWeights) {
  // All-ones 2x3x3 weight with unit style: sum of squares is 18. A single
  // one at the centre of the input picks out exactly one tap per channel.
  const Tensor w = Tensor::full({1, 2, 3, 3}, 1.0f);
  Tensor x({2, 3, 3});
  x[4] = 1.0f;
  const std::vector<float> style{1.0f, 1.0f};
  const auto y = conv2d_modulated(x, w, style, 1e-8f);
  const double divisor = 1.0 / y[4];
  EXPECT_NEAR(divisor, std::sqrt(18.0 + 1e-8), 1e-5);
  EXPECT_NEAR(divisor, 4.2426, 1e-4);
  for (float v : y.values()) EXPECT_FLOAT_EQ(v, y[4]);
}

TEST(Conv, RejectsMismatchedShapes) {
  const Tensor x({2, 4, 4});
  const std::vector<float> style2{1, 1}, style3{1, 1, 1};
  EXPECT_THROW(conv2d_modulated(x, Tensor({1, 3, 3, 3}), style3), Error);
  EXPECT_THROW(conv2d_modulated(x, Tensor({1, 2, 3, 3}), style3), Error);
  EXPECT_THROW(conv2d_modulated(x, Tensor({1, 2, 2, 2}), style2), Error);
  EXPECT_THROW(conv2d_modulated(x, Tensor({1, 2, 3, 3}), style2, -1.0f), Error);
  try {
    conv2d_modulated(x, Tensor({1, 2, 3, 1}), style2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Shape);
  }
}

// Exercises every kernel path: narrow maps, 16-wide tiles, row pairs, odd
// sizes and non-3 kernels.
struct ConvCase {
  int ci, co, h, w, k;
  bool demod;
};

class ConvAgainstReference : public ::testing::TestWithParam<ConvCase> {};

TEST_P(ConvAgainstReference, MatchesDirectDefinition) {
  const auto c = GetParam();
  const auto x = random_tensor({std::size_t(c.ci), std::size_t(c.h), std::size_t(c.w)}, 3, "x");
  const auto w = random_tensor(
      {std::size_t(c.co), std::size_t(c.ci), std::size_t(c.k), std::size_t(c.k)}, 4, "w", 0.3f);
  const auto style = random_values(c.ci, 5, "s");
  const auto got = conv2d_modulated(x, w, style, 1e-8f, c.demod);
  const std::vector<double> xd(x.values().begin(), x.values().end());
  const std::vector<double> sd(style.begin(), style.end());
  const auto want = testutil::ref_conv(xd, c.ci, c.h, c.w, w, sd, 1e-8, c.demod);
  EXPECT_LT(max_rel_error(got, want), 2e-6);
}

INSTANTIATE_TEST_SUITE_P(
    Shapes, ConvAgainstReference,
    ::testing::Values(ConvCase{64, 64, 4, 4, 3, true}, ConvCase{64, 32, 8, 8, 3, true},
                      ConvCase{32, 16, 16, 16, 3, true}, ConvCase{16, 8, 32, 32, 3, true},
                      ConvCase{8, 8, 64, 64, 3, true}, ConvCase{5, 7, 16, 16, 3, true},
                      ConvCase{3, 5, 15, 17, 3, true}, ConvCase{4, 19, 2, 8, 3, true},
                      ConvCase{6, 3, 9, 9, 5, true}, ConvCase{8, 3, 16, 16, 1, false},
                      ConvCase{7, 3, 5, 5, 1, false}, ConvCase{2, 9, 32, 48, 3, false},
                      ConvCase{3, 2, 1, 1, 3, true}));

TEST(Conv, LinearInInput) {
  const auto x = random_tensor({16, 16, 16}, 10, "x");
  const auto w = random_tensor({8, 16, 3, 3}, 11, "w");
  const auto style = random_values(16, 12, "s");
  const auto y = conv2d_modulated(x, w, style);
  for (float a : {-3.0f, 0.5f, 7.25f}) {
    Tensor ax = x;
    for (float& v : ax.values()) v *= a;
    const auto ya = conv2d_modulated(ax, w, style);
    for (std::size_t i = 0; i < y.size(); ++i) {
      EXPECT_NEAR(ya[i], a * y[i], 1e-5 * std::max(1.0f, std::fabs(a * y[i])));
    }
  }
}

TEST(Conv, StyleScaleInvariantWithoutEpsilon) {
  const auto x = random_tensor({8, 8, 8}, 20, "x");
  const auto w = random_tensor({4, 8, 3, 3}, 21, "w");
  const auto style = random_values(8, 22, "s");
  const auto y1 = conv2d_modulated(x, w, style, 0.0f);
  for (float c : {2.0f, 0.01f, 37.0f}) {
    std::vector<float> sc(style);
    for (float& v : sc) v *= c;
    const auto yc = conv2d_modulated(x, w, sc, 0.0f);
    for (std::size_t i = 0; i < y1.size(); ++i) {
      EXPECT_NEAR(yc[i], y1[i], 1e-4 * std::max(1.0f, std::fabs(y1[i])));
    }
  }
}

TEST(Conv, NonFiniteInputRejected) {
  auto x = random_tensor({2, 4, 4}, 1, "x");
  x[3] = std::numeric_limits<float>::infinity();
  const auto w = random_tensor({2, 2, 3, 3}, 2, "w");
  const std::vector<float> style{1, 1};
  try {
    conv2d_modulated(x, w, style);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFinite);
  }
}

TEST(Upsample, ReplicatesBlocks) {
  const Tensor x({1, 2, 2}, {1, 2, 3, 4});
  const auto y = upsample2x(x);
  const std::vector<float> want{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  ASSERT_EQ(y.dims(), (Shape{1, 4, 4}));
  EXPECT_EQ(std::vector<float>(y.values().begin(), y.values().end()), want);
}

TEST(Upsample, ConstantStaysConstant) {
  const auto y = upsample2x(Tensor::full({3, 5, 4}, 2.5f));
  EXPECT_EQ(y.dims(), (Shape{3, 10, 8}));
  for (float v : y.values()) EXPECT_EQ(v, 2.5f);
}

TEST(Upsample, DownsampleInvertsAndMeansArePreserved) {
  const auto x = random_tensor({4, 6, 6}, 30, "x");
  const auto up = upsample2x(x);
  EXPECT_TRUE(bit_equal(downsample2x(up), x));
  for (std::size_t c = 0; c < 4; ++c) {
    double a = 0, b = 0;
    for (std::size_t i = 0; i < 36; ++i) a += x[c * 36 + i];
    for (std::size_t i = 0; i < 144; ++i) b += up[c * 144 + i];
    EXPECT_NEAR(a / 36, b / 144, 1e-12);
  }
}

TEST(Downsample, RejectsOddSizes) {
  EXPECT_THROW(downsample2x(Tensor({1, 3, 4})), Error);
}

TEST(LeakyRelu, Values) {
  const Tensor x({3}, {0.0f, 1.0f, -1.0f});
  const auto y = leaky_relu(x, 0.2f, 1.0f);
  EXPECT_EQ(y[0], 0.0f);
  EXPECT_EQ(y[1], 1.0f);
  EXPECT_FLOAT_EQ(y[2], -0.2f);
  const auto d = leaky_relu(x);
  EXPECT_FLOAT_EQ(d[1], std::sqrt(2.0f));
  EXPECT_FLOAT_EQ(d[2], -0.2f * std::sqrt(2.0f));
}

TEST(Linear, MatchesDoubleSum) {
  const auto w = random_tensor({5, 37}, 40, "w");
  const auto b = random_tensor({5}, 41, "b");
  const auto x = random_values(37, 42, "x");
  const auto y = linear(x, w, b);
  for (std::size_t o = 0; o < 5; ++o) {
    double acc = b[o];
    for (std::size_t i = 0; i < 37; ++i) acc += double(w[o * 37 + i]) * x[i];
    EXPECT_NEAR(y[o], acc, 1e-5);
  }
  EXPECT_THROW(linear(std::vector<float>(36), w, b), Error);
}

TEST(Mse, MatchesDefinitionAndRejectsMismatch) {
  const auto a = random_values(1000, 1, "a");
  const auto b = random_values(1000, 2, "b");
  double want = 0;
  for (std::size_t i = 0; i < a.size(); ++i) want += (double(a[i]) - b[i]) * (double(a[i]) - b[i]);
  want /= a.size();
  EXPECT_NEAR(mean_squared_error(a, b), want, 1e-12 * want);
  EXPECT_EQ(mean_squared_error(a, a), 0.0);
  EXPECT_THROW(mean_squared_error(std::span(a).first(10), std::span(b).first(9)), Error);
}

TEST(Image, MustBeSquareRgbPowerOfTwo) {
  EXPECT_THROW(Image(Tensor({3, 4, 8})), Error);
  EXPECT_THROW(Image(Tensor({1, 4, 4})), Error);
  EXPECT_THROW(Image(Tensor({3, 6, 6})), Error);
  EXPECT_EQ(Image::filled(8, 0.5f).size(), 8u);
}
