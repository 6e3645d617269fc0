#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "maskseg/raster.hpp"

namespace maskseg {

struct PatchSpec {
  std::int64_t size = 256;
  std::int64_t stride = 128;

  void validate() const;
};

struct Window {
  std::int64_t row0 = 0;
  std::int64_t col0 = 0;

  friend bool operator==(const Window&, const Window&) = default;
};

// Starts k*stride with k*stride + size <= dim on each axis (a single start 0
// when dim < size), row-major.
std::vector<Window> plan_windows(std::int64_t height, std::int64_t width, const PatchSpec& spec);

// Starts along one axis under the same rule.
std::vector<std::int64_t> plan_axis(std::int64_t dim, std::int64_t size, std::int64_t stride);

struct Patch {
  std::int64_t size = 0;
  std::int64_t row0 = 0;
  std::int64_t col0 = 0;
  std::vector<float> image;        // [3, size, size], u8 / 255
  std::vector<std::uint8_t> mask;  // [size, size]
  std::vector<std::uint8_t> label; // [size, size]

  friend bool operator==(const Patch&, const Patch&) = default;
};

// Out-of-raster samples read as zero in every channel.
std::vector<Patch> extract_patches(const Raster& image, const Raster& mask, const Raster& label,
                                   const PatchSpec& spec);

enum class Split : std::uint8_t { train, val, test };

std::string_view split_name(Split s);
Split split_from_name(std::string_view name);

struct SplitFractions {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;

  void validate() const;
  friend bool operator==(const SplitFractions&, const SplitFractions&) = default;
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;

  friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

struct SplitAssignment {
  std::vector<Split> tags;  // one per patch index
  std::uint64_t seed = 0;
  SplitFractions fractions;

  SplitCounts counts() const;
  std::vector<std::size_t> indices(Split which) const;
  friend bool operator==(const SplitAssignment&, const SplitAssignment&) = default;
};

// n_test = floor(f_test n), n_val = floor(f_val n), the rest train. Indices are
// Fisher-Yates shuffled with splitmix64(seed); the shuffled order is then cut
// into train, val, test.
SplitAssignment split_assign(std::size_t n, const SplitFractions& fractions, std::uint64_t seed);

struct PatchArchive {
  PatchSpec spec;
  GridTransform grid;
  SplitAssignment assignment;
  std::vector<Patch> patches;

  friend bool operator==(const PatchArchive& a, const PatchArchive& b) {
    return a.spec.size == b.spec.size && a.spec.stride == b.spec.stride && a.grid == b.grid &&
           a.assignment == b.assignment && a.patches == b.patches;
  }
};

// MKPATCH1 container: manifest JSON then per patch image f32 LE, mask u8,
// label u8, in manifest order.
std::string archive_encode(const PatchArchive& archive);
PatchArchive archive_decode(std::string_view bytes);
void archive_write(const PatchArchive& archive, const std::filesystem::path& path);
PatchArchive archive_read(const std::filesystem::path& path);

}  // namespace maskseg
