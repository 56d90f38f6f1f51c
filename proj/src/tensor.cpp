#include "ganblend/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "conv_kernels.hpp"

namespace ganblend {

std::string shape_to_string(const Shape& dims) {
  std::string out;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(dims[i]);
  }
  return out;
}

std::size_t shape_volume(const Shape& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         std::multiplies<>());
}

namespace {

void check_dims(const Shape& dims) {
  if (dims.empty()) throw Error(ErrorKind::Shape, "tensor rank must be >= 1");
  for (auto d : dims) {
    if (d == 0) {
      throw Error(ErrorKind::Shape,
                  "tensor dims must be positive, got " + shape_to_string(dims));
    }
  }
}

}  // namespace

Tensor::Tensor(Shape dims) : dims_(std::move(dims)) {
  check_dims(dims_);
  data_.assign(shape_volume(dims_), 0.0f);
}

Tensor::Tensor(Shape dims, std::vector<float> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  check_dims(dims_);
  if (data_.size() != shape_volume(dims_)) {
    throw Error(ErrorKind::Shape,
                "data length " + std::to_string(data_.size()) +
                    " does not match dims " + shape_to_string(dims_));
  }
}

Tensor Tensor::full(Shape dims, float value) {
  Tensor t(std::move(dims));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](float v) { return std::isfinite(v); });
}

bool bit_equal(const Tensor& a, const Tensor& b) noexcept {
  return a.dims() == b.dims() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

Image::Image(Tensor pixels) : pixels_(std::move(pixels)) {
  const auto& d = pixels_.dims();
  if (d.size() != 3 || d[0] != 3) {
    throw Error(ErrorKind::Shape,
                "image must be [3, H, W], got " + shape_to_string(d));
  }
  if (d[1] != d[2] || (d[1] & (d[1] - 1)) != 0) {
    throw Error(ErrorKind::Shape,
                "image must be square with power-of-two side, got " +
                    shape_to_string(d));
  }
}

Image Image::filled(std::size_t size, float value) {
  return Image(Tensor::full({3, size, size}, value));
}

double mean_squared_error(const Image& a, const Image& b) {
  if (a.pixels().dims() != b.pixels().dims()) {
    throw Error(ErrorKind::Shape, "image size mismatch: " +
                                      shape_to_string(a.pixels().dims()) +
                                      " vs " +
                                      shape_to_string(b.pixels().dims()));
  }
  return mean_squared_error(a.pixels().values(), b.pixels().values());
}

double mean_squared_error(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size() || a.empty()) {
    throw Error(ErrorKind::Shape, "mean_squared_error needs equal, non-empty inputs (" +
                                      std::to_string(a.size()) + " vs " +
                                      std::to_string(b.size()) + ")");
  }
  double part[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= a.size(); i += 8) {
    for (int l = 0; l < 8; ++l) {
      const double d = static_cast<double>(a[i + l]) - b[i + l];
      part[l] += d * d;
    }
  }
  for (; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    part[i % 8] += d * d;
  }
  double sum = 0.0;
  for (double p : part) sum += p;
  return sum / static_cast<double>(a.size());
}

Tensor conv2d_modulated(const Tensor& input, const Tensor& weight,
                        std::span<const float> style, float epsilon,
                        bool demodulate) {
  if (input.rank() != 3) {
    throw Error(ErrorKind::Shape, "conv input must be [C, H, W], got " +
                                      shape_to_string(input.dims()));
  }
  if (weight.rank() != 4 || weight.dim(2) != weight.dim(3) ||
      weight.dim(2) % 2 == 0) {
    throw Error(ErrorKind::Shape,
                "conv weight must be [Co, Ci, k, k] with odd k, got " +
                    shape_to_string(weight.dims()));
  }
  const int co = static_cast<int>(weight.dim(0));
  const int ci = static_cast<int>(weight.dim(1));
  const int k = static_cast<int>(weight.dim(2));
  const int h = static_cast<int>(input.dim(1));
  const int w = static_cast<int>(input.dim(2));
  if (static_cast<int>(input.dim(0)) != ci) {
    throw Error(ErrorKind::Shape,
                "conv input has " + std::to_string(input.dim(0)) +
                    " channels, weight expects " + std::to_string(ci));
  }
  if (static_cast<int>(style.size()) != ci) {
    throw Error(ErrorKind::Shape, "style length " + std::to_string(style.size()) +
                                      " != input channels " + std::to_string(ci));
  }
  if (!(epsilon >= 0.0f)) {
    throw Error(ErrorKind::InvalidArgument, "demodulation epsilon must be >= 0");
  }

  // The style scales the input channels; demodulation scales each output channel.
  std::vector<float> packed(weight.size());
  detail::pack_conv_weight(weight.data(), co, ci, k, packed.data());
  std::vector<float> scale;
  detail::Epilogue epi;
  if (demodulate) {
    std::vector<float> sq(static_cast<std::size_t>(co) * ci);
    detail::conv_weight_sq(weight.data(), co, ci, k, sq.data());
    scale = detail::demod_scale(sq.data(), co, ci, style.data(), epsilon);
    epi.scale = scale.data();
  }

  Tensor out({static_cast<std::size_t>(co), static_cast<std::size_t>(h),
              static_cast<std::size_t>(w)});
  std::vector<float> pad;
  detail::fill_padded(input.data(), ci, h, w, k / 2, style.data(), false, pad);
  if (k == 1) {
    detail::conv_pointwise(pad.data(), ci, h, w, packed.data(), co, epi, out.data());
  } else {
    detail::conv_padded(pad.data(), ci, h, w, k, packed.data(), co, epi, out.data());
  }

  if (!detail::all_finite(out.data(), out.size())) {
    throw Error(ErrorKind::NonFinite, "modulated convolution produced non-finite values");
  }
  return out;
}

Tensor upsample2x(const Tensor& input) {
  if (input.rank() != 3) {
    throw Error(ErrorKind::Shape, "upsample2x expects [C, H, W], got " +
                                      shape_to_string(input.dims()));
  }
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  Tensor out({c, 2 * h, 2 * w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < 2 * h; ++y) {
      const float* src = input.data() + (ch * h + y / 2) * w;
      float* dst = out.data() + (ch * 2 * h + y) * 2 * w;
      for (std::size_t x = 0; x < 2 * w; ++x) dst[x] = src[x / 2];
    }
  }
  return out;
}

Tensor downsample2x(const Tensor& input) {
  if (input.rank() != 3 || input.dim(1) % 2 || input.dim(2) % 2) {
    throw Error(ErrorKind::Shape, "downsample2x expects [C, H, W] with even H, W, got " +
                                      shape_to_string(input.dims()));
  }
  const std::size_t c = input.dim(0), h = input.dim(1) / 2, w = input.dim(2) / 2;
  Tensor out({c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      const float* r0 = input.data() + (ch * 2 * h + 2 * y) * 2 * w;
      const float* r1 = r0 + 2 * w;
      for (std::size_t x = 0; x < w; ++x) {
        out[(ch * h + y) * w + x] =
            ((r0[2 * x] + r0[2 * x + 1]) + (r1[2 * x] + r1[2 * x + 1])) * 0.25f;
      }
    }
  }
  return out;
}

Tensor leaky_relu(const Tensor& input, float slope, float gain) {
  if (!(slope > 0.0f && slope < 1.0f)) {
    throw Error(ErrorKind::InvalidArgument, "leaky_relu slope must be in (0, 1)");
  }
  Tensor out = input;
  const float neg = gain * slope;
  for (float& v : out.values()) v = v >= 0.0f ? gain * v : neg * v;
  return out;
}

std::vector<float> linear(std::span<const float> x, const Tensor& weight,
                          const Tensor& bias) {
  if (weight.rank() != 2 || weight.dim(1) != x.size()) {
    throw Error(ErrorKind::Shape, "linear weight " + shape_to_string(weight.dims()) +
                                      " incompatible with input of length " +
                                      std::to_string(x.size()));
  }
  const std::size_t n_out = weight.dim(0);
  if (bias.size() != n_out) {
    throw Error(ErrorKind::Shape, "linear bias length " + std::to_string(bias.size()) +
                                      " != " + std::to_string(n_out));
  }
  std::vector<float> y(n_out);
  for (std::size_t o = 0; o < n_out; ++o) {
    const float* row = weight.data() + o * x.size();
    // Eight interleaved partial sums keep the reduction vectorizable.
    double part[8] = {};
    std::size_t i = 0;
    for (; i + 8 <= x.size(); i += 8) {
      for (int l = 0; l < 8; ++l) part[l] += static_cast<double>(row[i + l]) * x[i + l];
    }
    for (; i < x.size(); ++i) part[i % 8] += static_cast<double>(row[i]) * x[i];
    double acc = bias[o];
    for (double p : part) acc += p;
    y[o] = static_cast<float>(acc);
  }
  return y;
}

}  // namespace ganblend
