#pragma once

#include <cstdint>

#include "ganblend/checkpoint.hpp"
#include "ganblend/png_io.hpp"

namespace ganblend {

inline constexpr std::size_t kGridBorder = 2;

// Sample i renders sample_latent(config, seed, i) with noise seed `seed`.
// Layout: columns' = min(columns, count), rows = ceil(count / columns');
// every cell is the R x R sample framed by a 2 px black border, so the raster
// is columns' * (R + 4) wide and rows * (R + 4) high. Unused cells are black.
struct SampleGridSpec {
  std::uint64_t seed = 0;
  int count = 24;
  int columns = 6;

  void validate() const;
};

struct GridLayout {
  std::size_t columns;
  std::size_t rows;
  std::size_t width;
  std::size_t height;
};

GridLayout grid_layout(const SampleGridSpec& spec, std::size_t resolution);
Rgb8Raster sample_grid(const Checkpoint& ckpt, const SampleGridSpec& spec);

}  // namespace ganblend
