#include "ganblend/grid.hpp"

#include <algorithm>

#include "ganblend/generator.hpp"

namespace ganblend {

void SampleGridSpec::validate() const {
  if (count < 1) throw Error(ErrorKind::InvalidArgument, "sample count must be >= 1");
  if (columns < 1) throw Error(ErrorKind::InvalidArgument, "grid columns must be >= 1");
}

GridLayout grid_layout(const SampleGridSpec& spec, std::size_t resolution) {
  spec.validate();
  const auto count = static_cast<std::size_t>(spec.count);
  const auto cols = std::min(static_cast<std::size_t>(spec.columns), count);
  const auto rows = (count + cols - 1) / cols;
  const auto cell = resolution + 2 * kGridBorder;
  return {cols, rows, cols * cell, rows * cell};
}

Rgb8Raster sample_grid(const Checkpoint& ckpt, const SampleGridSpec& spec) {
  const auto res = static_cast<std::size_t>(ckpt.meta().max_resolution);
  const auto layout = grid_layout(spec, res);
  Rgb8Raster raster{layout.width, layout.height,
                    std::vector<std::uint8_t>(layout.width * layout.height * 3, 0)};

  const Synthesizer net(ckpt);
  const NoiseBank noise(ckpt.meta(), NoiseSpec{spec.seed});
  const std::size_t cell = res + 2 * kGridBorder;
  for (std::size_t i = 0; i < static_cast<std::size_t>(spec.count); ++i) {
    const auto z = sample_latent(ckpt.meta(), spec.seed, i);
    const auto tile = to_raster(net.render(map_latent(ckpt, z), noise));
    const std::size_t x0 = (i % layout.columns) * cell + kGridBorder;
    const std::size_t y0 = (i / layout.columns) * cell + kGridBorder;
    for (std::size_t y = 0; y < res; ++y) {
      std::copy_n(tile.bytes.begin() + static_cast<std::ptrdiff_t>(y * res * 3), res * 3,
                  raster.bytes.begin() +
                      static_cast<std::ptrdiff_t>(((y0 + y) * layout.width + x0) * 3));
    }
  }
  return raster;
}

}  // namespace ganblend
