#include "maskseg/predict.hpp"

#include "maskseg/ops.hpp"
#include "maskseg/patches.hpp"

namespace maskseg {

std::vector<std::int64_t> plan_tile_axis(std::int64_t dim, std::int64_t tile, std::int64_t stride) {
  auto starts = plan_axis(dim, tile, stride);
  if (dim >= tile && starts.back() + tile < dim) starts.push_back(dim - tile);
  return starts;
}

Prediction predict_tiled(const ModelParams& params, const InputEncoding& encoding, const Raster& image,
                         const Raster* mask, const PredictOptions& options) {
  PatchSpec{options.tile, options.tile_stride}.validate();
  if (image.dtype() != DType::u8 || image.bands() != 3) throw ValidationError("image must be a 3-band u8 raster");
  if (mask) {
    require_same_grid(image.grid(), mask->grid(), "predict (image vs mask)");
    require_binary(*mask, "mask");
  }
  if (encoding.channels() != params.config.in_channels) {
    throw ValidationError("model expects " + std::to_string(params.config.in_channels) +
                          " input channels but mask_mode provides " + std::to_string(encoding.channels()));
  }
  if (options.tile % params.config.size_multiple() != 0) {
    throw ValidationError("tile size must be divisible by 2^levels = " +
                          std::to_string(params.config.size_multiple()));
  }

  const GridTransform& grid = image.grid();
  const std::int64_t H = grid.height, W = grid.width, S = options.tile;
  const auto plane = static_cast<std::size_t>(S * S);
  const auto npix = grid.pixel_count();
  const auto img = image.u8();

  std::vector<double> sum(npix, 0.0);
  std::vector<std::uint32_t> count(npix, 0);
  std::vector<float> rgb(3 * plane);
  std::vector<std::uint8_t> tile_mask(plane);
  Tensor<float> input({1, static_cast<std::size_t>(encoding.channels()), static_cast<std::size_t>(S),
                       static_cast<std::size_t>(S)});

  for (const auto r0 : plan_tile_axis(H, S, options.tile_stride)) {
    for (const auto c0 : plan_tile_axis(W, S, options.tile_stride)) {
      std::fill(rgb.begin(), rgb.end(), 0.0f);
      std::fill(tile_mask.begin(), tile_mask.end(), 0);
      const std::int64_t rows = std::min(S, H - r0), cols = std::min(S, W - c0);
      for (std::int64_t r = 0; r < rows; ++r) {
        for (std::int64_t c = 0; c < cols; ++c) {
          const auto dst = static_cast<std::size_t>(r * S + c);
          for (int b = 0; b < 3; ++b) {
            rgb[static_cast<std::size_t>(b) * plane + dst] =
                static_cast<float>(img[image.index(b, r0 + r, c0 + c)]) / 255.0f;
          }
          tile_mask[dst] = mask ? mask->u8()[mask->index(0, r0 + r, c0 + c)] : 1;
        }
      }
      encode_input(rgb.data(), tile_mask.data(), plane, encoding, input.ptr());
      const auto probs = sigmoid_values(unet_forward(params, constant(input))->value);
      for (std::int64_t r = 0; r < rows; ++r) {
        for (std::int64_t c = 0; c < cols; ++c) {
          const auto k = static_cast<std::size_t>((r0 + r) * W + c0 + c);
          sum[k] += static_cast<double>(probs[static_cast<std::size_t>(r * S + c)]);
          ++count[k];
        }
      }
    }
  }

  Prediction out{Raster(grid, 1, DType::f32), Raster(grid, 1, DType::u8)};
  auto prob = out.probability.f32();
  auto bin = out.binary.u8();
  for (std::size_t k = 0; k < npix; ++k) {
    const bool valid = mask ? mask->u8()[k] != 0 : true;
    const float p = valid && count[k] ? static_cast<float>(sum[k] / static_cast<double>(count[k])) : 0.0f;
    prob[k] = p;
    bin[k] = valid && static_cast<double>(p) >= options.threshold ? 1 : 0;
  }
  return out;
}

}  // namespace maskseg
