#pragma once

// Internal convolution kernels shared by tensor.cpp and the generator.

#include <cstddef>
#include <vector>

namespace ganblend::detail {

// Applied to every raw accumulator a at output (o, p):
//   v = a * scale[o] + noise_strength * noise[p] + bias[o], then optional leaky relu.
// Null pointers mean scale 1, no noise, bias 0.
struct Epilogue {
  const float* scale = nullptr;
  const float* bias = nullptr;
  const float* noise = nullptr;
  float noise_strength = 0.0f;
  bool activate = false;
};

// [Co][Ci][k][k] -> [Ci][k*k][Co].
void pack_conv_weight(const float* weight, int co, int ci, int k, float* packed);

// Per-(o, i) sums of squared taps, [Co][Ci].
void conv_weight_sq(const float* weight, int co, int ci, int k, float* out);

// 1 / sqrt(sum_i sq[o][i] * style_i^2 + epsilon) per output channel.
std::vector<float> demod_scale(const float* sq, int co, int ci, const float* style,
                               float epsilon);
void demod_scale(const float* sq, int co, int ci, const float* style, float epsilon,
                 float* out);

// Fills buf with the zero-padded [Ci][H+2p][W+2p] copy of x scaled per channel
// by style. With upsample, x is [Ci][H/2][W/2] and is replicated 2x2.
void fill_padded(const float* x, int ci, int h, int w, int pad, const float* style,
                 bool upsample, std::vector<float>& buf);

// Stride-1 cross-correlation of a padded input with packed weights.
void conv_padded(const float* padded, int ci, int h, int w, int k, const float* packed, int co,
                 const Epilogue& epi, float* out);

// 1x1 convolution of an unpadded [Ci][H][W] input.
void conv_pointwise(const float* x, int ci, int h, int w, const float* packed, int co,
                    const Epilogue& epi, float* out);

bool all_finite(const float* p, std::size_t n);

}  // namespace ganblend::detail
