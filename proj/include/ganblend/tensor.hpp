#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ganblend/error.hpp"

namespace ganblend {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& dims);
std::size_t shape_volume(const Shape& dims);

// Dense row-major f32 tensor. Rank >= 1, every dim >= 1.
class Tensor {
 public:
  Tensor() : dims_{1}, data_(1, 0.0f) {}
  explicit Tensor(Shape dims);
  Tensor(Shape dims, std::vector<float> data);

  static Tensor full(Shape dims, float value);

  const Shape& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<float> values() noexcept { return data_; }
  std::span<const float> values() const noexcept { return data_; }
  float* data() noexcept { return data_.data(); }
  const float* data() const noexcept { return data_.data(); }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  bool all_finite() const noexcept;

 private:
  Shape dims_;
  std::vector<float> data_;
};

// Same dims and identical bit patterns (distinguishes -0/+0 and NaN payloads).
bool bit_equal(const Tensor& a, const Tensor& b) noexcept;

// RGB image stored as a [3, size, size] tensor with nominal range [-1, 1].
class Image {
 public:
  Image() : Image(Tensor({3, 1, 1})) {}
  explicit Image(Tensor pixels);
  static Image filled(std::size_t size, float value);

  std::size_t size() const noexcept { return pixels_.dim(1); }
  std::size_t height() const noexcept { return pixels_.dim(1); }
  std::size_t width() const noexcept { return pixels_.dim(2); }

  const Tensor& pixels() const noexcept { return pixels_; }
  Tensor& pixels() noexcept { return pixels_; }

  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return pixels_[(c * height() + y) * width() + x];
  }

 private:
  Tensor pixels_;
};

double mean_squared_error(const Image& a, const Image& b);
double mean_squared_error(std::span<const float> a, std::span<const float> b);

inline constexpr float kDefaultDemodEpsilon = 1e-8f;
inline constexpr float kDefaultLeakySlope = 0.2f;
inline constexpr float kDefaultLeakyGain = 1.4142135623730951f;

// Modulated convolution: per output channel j the effective weight is
// style_i * w[j,i] / sqrt(sum_{i,ky,kx} (style_i * w[j,i,ky,kx])^2 + epsilon),
// applied as zero-padded stride-1 cross-correlation. With demodulate=false the
// divisor is skipped (ToRGB layers).
Tensor conv2d_modulated(const Tensor& input, const Tensor& weight,
                        std::span<const float> style,
                        float epsilon = kDefaultDemodEpsilon,
                        bool demodulate = true);

Tensor upsample2x(const Tensor& input);
Tensor downsample2x(const Tensor& input);

Tensor leaky_relu(const Tensor& input, float slope = kDefaultLeakySlope,
                  float gain = kDefaultLeakyGain);

// y = weight * x + bias; weight is [out, in].
std::vector<float> linear(std::span<const float> x, const Tensor& weight,
                          const Tensor& bias);

}  // namespace ganblend
