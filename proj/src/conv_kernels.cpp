#include "conv_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>

#include <immintrin.h>

#include "ganblend/tensor.hpp"

namespace ganblend::detail {

namespace {

using v16 = float __attribute__((vector_size(64)));
constexpr int kLanes = 16;

inline v16 load16(const float* p) {
  v16 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline float finish(float a, int o, std::size_t p, const Epilogue& e) {
  float v = e.scale ? a * e.scale[o] : a;
  if (e.noise) v += e.noise_strength * e.noise[p];
  if (e.bias) v += e.bias[o];
  if (e.activate) {
    v = v >= 0.0f ? kDefaultLeakyGain * v : kDefaultLeakyGain * kDefaultLeakySlope * v;
  }
  return v;
}

inline v16 finish16(v16 a, int o, std::size_t p, const Epilogue& e) {
  v16 v = e.scale ? a * e.scale[o] : a;
  if (e.noise) v += e.noise_strength * load16(e.noise + p);
  if (e.bias) v += e.bias[o];
  if (e.activate) {
    const v16 pos = kDefaultLeakyGain * v;
    const v16 neg = (kDefaultLeakyGain * kDefaultLeakySlope) * v;
    v = v >= 0.0f ? pos : neg;
  }
  return v;
}

// Vectorized over 16 consecutive output pixels; OC output channels per tile.
template <int OC>
void conv3x3_pixel_tile(const float* pad, int ci, int h, int w, const float* wt, int co,
                        int o0, const Epilogue& epi, float* out) {
  const int pw = w + 2;
  const std::size_t plane_size = static_cast<std::size_t>(h + 2) * pw;
  for (int y = 0; y < h; ++y) {
    for (int x0 = 0; x0 < w; x0 += kLanes) {
      v16 acc[OC] = {};
      const float* wrow = wt + o0;
      const float* plane = pad + y * pw + x0;
      for (int i = 0; i < ci; ++i, plane += plane_size) {
        for (int ky = 0; ky < 3; ++ky) {
          const float* src = plane + ky * pw;
          for (int kx = 0; kx < 3; ++kx, wrow += co) {
            const v16 s = load16(src + kx);
            for (int o = 0; o < OC; ++o) acc[o] += _mm512_set1_ps(wrow[o]) * s;
          }
        }
      }
      const std::size_t pix = static_cast<std::size_t>(y) * w + x0;
      for (int o = 0; o < OC; ++o) {
        const v16 v = finish16(acc[o], o0 + o, pix, epi);
        std::memcpy(out + static_cast<std::size_t>(o0 + o) * h * w + pix, &v, sizeof v);
      }
    }
  }
}

// Two output rows per tile, for narrow OC where one row has too few
// independent accumulators to cover FMA latency.
template <int OC>
void conv3x3_pixel_tile2(const float* pad, int ci, int h, int w, const float* wt, int co,
                         int o0, const Epilogue& epi, float* out) {
  const int pw = w + 2;
  const std::size_t plane_size = static_cast<std::size_t>(h + 2) * pw;
  for (int y = 0; y < h; y += 2) {
    for (int x0 = 0; x0 < w; x0 += kLanes) {
      v16 a0[OC] = {};
      v16 a1[OC] = {};
      const float* wrow = wt + o0;
      const float* plane = pad + y * pw + x0;
      for (int i = 0; i < ci; ++i, plane += plane_size) {
        for (int ky = 0; ky < 3; ++ky) {
          const float* src = plane + ky * pw;
          for (int kx = 0; kx < 3; ++kx, wrow += co) {
            const v16 s0 = load16(src + kx);
            const v16 s1 = load16(src + pw + kx);
            for (int o = 0; o < OC; ++o) {
              const v16 wv = _mm512_set1_ps(wrow[o]);
              a0[o] += wv * s0;
              a1[o] += wv * s1;
            }
          }
        }
      }
      const std::size_t pix = static_cast<std::size_t>(y) * w + x0;
      for (int o = 0; o < OC; ++o) {
        const v16 v0 = finish16(a0[o], o0 + o, pix, epi);
        const v16 v1 = finish16(a1[o], o0 + o, pix + w, epi);
        std::memcpy(out + static_cast<std::size_t>(o0 + o) * h * w + pix, &v0, sizeof v0);
        std::memcpy(out + static_cast<std::size_t>(o0 + o) * h * w + pix + w, &v1, sizeof v1);
      }
    }
  }
}

// Narrow maps: the input is stored as three column-shifted copies
// [kx][Ci][H+2][W] so every tap is a contiguous 16-pixel load even when the
// vector spans several rows.
bool use_shifted_layout(int h, int w) { return w < kLanes && (h * w) % kLanes == 0; }

template <int OC>
void conv3x3_shifted_tile(const float* buf, int ci, int h, int w, const float* wt, int co,
                          int o0, const Epilogue& epi, float* out) {
  const std::size_t plane = static_cast<std::size_t>(h + 2) * w;
  const std::size_t copy = static_cast<std::size_t>(ci) * plane;
  const int hw = h * w;
  for (int n0 = 0; n0 < hw; n0 += kLanes) {
    v16 acc[OC] = {};
    const float* wrow = wt + o0;
    for (int i = 0; i < ci; ++i) {
      const float* base = buf + i * plane + n0;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx, wrow += co) {
          const v16 s = load16(base + kx * copy + ky * w);
          for (int o = 0; o < OC; ++o) acc[o] += _mm512_set1_ps(wrow[o]) * s;
        }
      }
    }
    for (int o = 0; o < OC; ++o) {
      const v16 v = finish16(acc[o], o0 + o, n0, epi);
      std::memcpy(out + static_cast<std::size_t>(o0 + o) * hw + n0, &v, sizeof v);
    }
  }
}

void fill_shifted(const float* x, int ci, int h, int w, const float* style, bool upsample,
                  std::vector<float>& buf) {
  const std::size_t plane = static_cast<std::size_t>(h + 2) * w;
  const std::size_t copy = static_cast<std::size_t>(ci) * plane;
  buf.resize(3 * copy);
  const int sw = upsample ? w / 2 : w;
  const int sh = upsample ? h / 2 : h;
  for (int i = 0; i < ci; ++i) {
    float* d0 = buf.data() + i * plane;
    float* d1 = d0 + copy;
    float* d2 = d1 + copy;
    for (float* d : {d0, d1, d2}) {
      std::fill(d, d + w, 0.0f);
      std::fill(d + static_cast<std::size_t>(h + 1) * w, d + plane, 0.0f);
    }
    const float s = style[i];
    const float* src = x + static_cast<std::size_t>(i) * sh * sw;
    for (int y = 0; y < h; ++y) {
      float* r0 = d0 + static_cast<std::size_t>(y + 1) * w;
      float* r1 = d1 + static_cast<std::size_t>(y + 1) * w;
      float* r2 = d2 + static_cast<std::size_t>(y + 1) * w;
      const float* in = src + static_cast<std::size_t>(upsample ? y / 2 : y) * sw;
      if (upsample) {
        for (int c = 0; c < sw; ++c) r1[2 * c] = r1[2 * c + 1] = s * in[c];
      } else {
        for (int c = 0; c < w; ++c) r1[c] = s * in[c];
      }
      r0[0] = 0.0f;
      std::memcpy(r0 + 1, r1, sizeof(float) * (w - 1));
      std::memcpy(r2, r1 + 1, sizeof(float) * (w - 1));
      r2[w - 1] = 0.0f;
    }
  }
}

void apply_epilogue(int co, std::size_t plane, const Epilogue& epi, float* out) {
  for (int o = 0; o < co; ++o) {
    float* row = out + o * plane;
    for (std::size_t p = 0; p < plane; ++p) row[p] = finish(row[p], o, p, epi);
  }
}

void conv_generic(const float* pad, int ci, int h, int w, int k, const float* wt, int co,
                  const Epilogue& epi, float* out) {
  const int pw = w + k - 1;
  const int plane_size = (h + k - 1) * pw;
  std::fill(out, out + static_cast<std::size_t>(co) * h * w, 0.0f);
  for (int o = 0; o < co; ++o) {
    float* dst = out + static_cast<std::size_t>(o) * h * w;
    for (int i = 0; i < ci; ++i) {
      const float* plane = pad + static_cast<std::size_t>(i) * plane_size;
      for (int tap = 0; tap < k * k; ++tap) {
        const float wv = wt[(static_cast<std::size_t>(i) * k * k + tap) * co + o];
        const int ky = tap / k;
        const int kx = tap % k;
        for (int y = 0; y < h; ++y) {
          const float* src = plane + (y + ky) * pw + kx;
          float* row = dst + static_cast<std::size_t>(y) * w;
          for (int x = 0; x < w; ++x) row[x] += wv * src[x];
        }
      }
    }
  }
  apply_epilogue(co, static_cast<std::size_t>(h) * w, epi, out);
}

}  // namespace

void pack_conv_weight(const float* weight, int co, int ci, int k, float* packed) {
  const std::size_t fan_in = static_cast<std::size_t>(ci) * k * k;
  for (int o = 0; o < co; ++o) {
    const float* row = weight + o * fan_in;
    for (std::size_t j = 0; j < fan_in; ++j) packed[j * co + o] = row[j];
  }
}

void conv_weight_sq(const float* weight, int co, int ci, int k, float* out) {
  const int taps = k * k;
  for (int o = 0; o < co; ++o) {
    for (int i = 0; i < ci; ++i) {
      const float* t = weight + (static_cast<std::size_t>(o) * ci + i) * taps;
      double s = 0.0;
      for (int j = 0; j < taps; ++j) s += static_cast<double>(t[j]) * t[j];
      out[static_cast<std::size_t>(o) * ci + i] = static_cast<float>(s);
    }
  }
}

void demod_scale(const float* sq, int co, int ci, const float* style, float epsilon,
                 float* out) {
  for (int o = 0; o < co; ++o) {
    const float* row = sq + static_cast<std::size_t>(o) * ci;
    double part[8] = {};
    int i = 0;
    for (; i + 8 <= ci; i += 8) {
      for (int l = 0; l < 8; ++l) {
        const double s = style[i + l];
        part[l] += row[i + l] * (s * s);
      }
    }
    for (; i < ci; ++i) {
      const double s = style[i];
      part[i % 8] += row[i] * (s * s);
    }
    double sum = 0.0;
    for (double p : part) sum += p;
    out[o] = static_cast<float>(1.0 / std::sqrt(sum + static_cast<double>(epsilon)));
  }
}

std::vector<float> demod_scale(const float* sq, int co, int ci, const float* style,
                               float epsilon) {
  std::vector<float> out(co);
  demod_scale(sq, co, ci, style, epsilon, out.data());
  return out;
}

void fill_padded(const float* x, int ci, int h, int w, int pad, const float* style,
                 bool upsample, std::vector<float>& buf) {
  if (pad == 1 && use_shifted_layout(h, w)) {
    fill_shifted(x, ci, h, w, style, upsample, buf);
    return;
  }
  const int pw = w + 2 * pad;
  const int ph = h + 2 * pad;
  const std::size_t plane = static_cast<std::size_t>(ph) * pw;
  buf.resize(static_cast<std::size_t>(ci) * plane);
  const int sw = upsample ? w / 2 : w;
  const int sh = upsample ? h / 2 : h;
  for (int i = 0; i < ci; ++i) {
    float* dst = buf.data() + i * plane;
    const float s = style[i];
    const float* src = x + static_cast<std::size_t>(i) * sh * sw;
    std::fill(dst, dst + static_cast<std::size_t>(pad) * pw, 0.0f);
    for (int y = 0; y < h; ++y) {
      float* row = dst + static_cast<std::size_t>(y + pad) * pw;
      std::fill(row, row + pad, 0.0f);
      std::fill(row + pad + w, row + pw, 0.0f);
      float* inner = row + pad;
      if (upsample && y % 2 == 1) {
        std::memcpy(inner, inner - pw, sizeof(float) * w);
      } else if (upsample) {
        const float* in = src + static_cast<std::size_t>(y / 2) * sw;
        for (int c = 0; c < sw; ++c) inner[2 * c] = inner[2 * c + 1] = s * in[c];
      } else {
        const float* in = src + static_cast<std::size_t>(y) * sw;
        for (int c = 0; c < w; ++c) inner[c] = s * in[c];
      }
    }
    std::fill(dst + static_cast<std::size_t>(pad + h) * pw, dst + plane, 0.0f);
  }
}

void conv_padded(const float* padded, int ci, int h, int w, int k, const float* packed, int co,
                 const Epilogue& epi, float* out) {
  if (k != 3) {
    conv_generic(padded, ci, h, w, k, packed, co, epi, out);
    return;
  }
  if (use_shifted_layout(h, w)) {
    int o0 = 0;
    for (; o0 + 16 <= co; o0 += 16) conv3x3_shifted_tile<16>(padded, ci, h, w, packed, co, o0, epi, out);
    for (; o0 + 8 <= co; o0 += 8) conv3x3_shifted_tile<8>(padded, ci, h, w, packed, co, o0, epi, out);
    for (; o0 + 4 <= co; o0 += 4) conv3x3_shifted_tile<4>(padded, ci, h, w, packed, co, o0, epi, out);
    for (; o0 < co; ++o0) conv3x3_shifted_tile<1>(padded, ci, h, w, packed, co, o0, epi, out);
    return;
  }
  if (w % kLanes == 0) {
    int o0 = 0;
    for (; o0 + 16 <= co; o0 += 16) conv3x3_pixel_tile<16>(padded, ci, h, w, packed, co, o0, epi, out);
    if (h % 2 == 0) {
      for (; o0 + 8 <= co; o0 += 8) conv3x3_pixel_tile2<8>(padded, ci, h, w, packed, co, o0, epi, out);
    }
    for (; o0 + 8 <= co; o0 += 8) conv3x3_pixel_tile<8>(padded, ci, h, w, packed, co, o0, epi, out);
    for (; o0 + 4 <= co; o0 += 4) conv3x3_pixel_tile<4>(padded, ci, h, w, packed, co, o0, epi, out);
    for (; o0 < co; ++o0) conv3x3_pixel_tile<1>(padded, ci, h, w, packed, co, o0, epi, out);
    return;
  }
  conv_generic(padded, ci, h, w, 3, packed, co, epi, out);
}

void conv_pointwise(const float* x, int ci, int h, int w, const float* packed, int co,
                    const Epilogue& epi, float* out) {
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  std::fill(out, out + co * plane, 0.0f);
  for (int o = 0; o < co; ++o) {
    float* row = out + o * plane;
    for (int i = 0; i < ci; ++i) {
      const float wv = packed[static_cast<std::size_t>(i) * co + o];
      const float* src = x + i * plane;
      for (std::size_t p = 0; p < plane; ++p) row[p] += wv * src[p];
    }
  }
  apply_epilogue(co, plane, epi, out);
}

bool all_finite(const float* p, std::size_t n) {
  std::uint32_t bad = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, p + i, sizeof bits);
    bad |= (bits & 0x7f800000u) == 0x7f800000u;
  }
  return bad == 0;
}

}  // namespace ganblend::detail
