#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ganblend/tensor.hpp"

namespace ganblend {

// Interleaved 8-bit RGB raster of arbitrary size (sample grids are not square).
struct Rgb8Raster {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> bytes;  // row-major, 3 bytes per pixel
};

// v -> round(clamp(v, -1, 1) * 127.5 + 127.5), halves rounded up.
std::uint8_t quantize(float v) noexcept;
float dequantize(std::uint8_t b) noexcept;

Rgb8Raster to_raster(const Image& image);
Image from_raster(const Rgb8Raster& raster);

std::vector<std::uint8_t> encode_png_bytes(const Rgb8Raster& raster);
Rgb8Raster decode_png_bytes(std::span<const std::uint8_t> png);

void encode_png(const Image& image, const std::filesystem::path& path);
Image decode_png(const std::filesystem::path& path);

void write_png(const Rgb8Raster& raster, const std::filesystem::path& path);

}  // namespace ganblend
