#include "ganblend/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

namespace ganblend {

std::uint8_t quantize(float v) noexcept {
  const double c = std::clamp(static_cast<double>(v), -1.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(c * 127.5 + 127.5 + 0.5));
}

float dequantize(std::uint8_t b) noexcept {
  return (static_cast<float>(b) - 127.5f) / 127.5f;
}

Rgb8Raster to_raster(const Image& image) {
  Rgb8Raster r{image.width(), image.height(), {}};
  r.bytes.resize(r.width * r.height * 3);
  for (std::size_t y = 0; y < r.height; ++y) {
    for (std::size_t x = 0; x < r.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        r.bytes[(y * r.width + x) * 3 + c] = quantize(image.at(c, y, x));
      }
    }
  }
  return r;
}

Image from_raster(const Rgb8Raster& raster) {
  Tensor t({3, raster.height, raster.width});
  for (std::size_t y = 0; y < raster.height; ++y) {
    for (std::size_t x = 0; x < raster.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        t[(c * raster.height + y) * raster.width + x] =
            dequantize(raster.bytes[(y * raster.width + x) * 3 + c]);
      }
    }
  }
  return Image(std::move(t));
}

std::vector<std::uint8_t> encode_png_bytes(const Rgb8Raster& raster) {
  if (raster.bytes.size() != raster.width * raster.height * 3 || raster.width == 0 ||
      raster.height == 0) {
    throw Error(ErrorKind::Shape, "raster byte count does not match its dimensions");
  }
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(raster.width);
  img.height = static_cast<png_uint_32>(raster.height);
  img.format = PNG_FORMAT_RGB;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, raster.bytes.data(), 0, nullptr)) {
    throw Error(ErrorKind::Io, std::string("png encode failed: ") + img.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, raster.bytes.data(), 0,
                                 nullptr)) {
    throw Error(ErrorKind::Io, std::string("png encode failed: ") + img.message);
  }
  out.resize(size);
  return out;
}

Rgb8Raster decode_png_bytes(std::span<const std::uint8_t> png) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, png.data(), png.size())) {
    throw Error(ErrorKind::Format, std::string("png decode failed: ") + img.message);
  }
  if (img.format != PNG_FORMAT_RGB) {
    png_image_free(&img);
    throw Error(ErrorKind::Format, "png is not 8-bit RGB without alpha");
  }
  Rgb8Raster r{img.width, img.height, {}};
  r.bytes.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, r.bytes.data(), 0, nullptr)) {
    throw Error(ErrorKind::Format, std::string("png decode failed: ") + img.message);
  }
  return r;
}

void write_png(const Rgb8Raster& raster, const std::filesystem::path& path) {
  const auto bytes = encode_png_bytes(raster);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

void encode_png(const Image& image, const std::filesystem::path& path) {
  if (!image.pixels().all_finite()) {
    throw Error(ErrorKind::NonFinite, "cannot encode image with non-finite values");
  }
  write_png(to_raster(image), path);
}

Image decode_png(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                        std::istreambuf_iterator<char>());
  return from_raster(decode_png_bytes(bytes));
}

}  // namespace ganblend
