#pragma once

#include <cstdint>
#include <vector>

#include "maskseg/raster.hpp"
#include "maskseg/unet.hpp"

namespace maskseg {

struct PredictOptions {
  std::int64_t tile = 256;
  std::int64_t tile_stride = 128;
  double threshold = 0.5;
};

struct Prediction {
  Raster probability;  // f32, coated with the mask
  Raster binary;       // u8 {0,1}
};

// Window starts along one axis: the patch rule plus a final window flush with
// the far edge when the regular starts leave it uncovered.
std::vector<std::int64_t> plan_tile_axis(std::int64_t dim, std::int64_t tile, std::int64_t stride);

// Tiled inference. Overlapping tile probabilities are averaged (sum/count),
// then multiplied by the mask. A null mask means all ones.
Prediction predict_tiled(const ModelParams& params, const InputEncoding& encoding, const Raster& image,
                         const Raster* mask, const PredictOptions& options = {});

}  // namespace maskseg
