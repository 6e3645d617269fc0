#pragma once

#include <cstdint>
#include <vector>

#include "maskseg/geodata.hpp"
#include "maskseg/raster.hpp"

namespace maskseg {

struct TreeDisk {
  double row = 0.0;  // center in pixel-edge coordinates (integer = pixel corner)
  double col = 0.0;
  int radius_px = 0;
  bool near_road = false;
};

struct SyntheticScene {
  Raster image;         // 3-band u8
  FeatureSet roads;     // polylines in the image's metric plane
  FeatureSet crowns;    // 16-gon crown polygons
  std::vector<TreeDisk> trees;
};

// Deterministic aerial-style scene drawn entirely from splitmix64(seed):
//  - background: gray-green with per-pixel noise
//  - roads: straight dark-gray strips, 4-8 px wide
//  - trees: saturated green disks of integer radius 4-10 px; three quarters of
//    them (rounded up) are centered within 22 px of a road
// The grid origin is (0, height * pixel_size) so all geometry is positive.
SyntheticScene generate_synthetic_scene(std::uint64_t seed, std::int64_t width, std::int64_t height, int n_trees,
                                        int n_roads, double pixel_size = 0.2);

}  // namespace maskseg
