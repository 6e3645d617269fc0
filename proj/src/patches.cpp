#include "maskseg/patches.hpp"

#include <cmath>
#include <numeric>

#include "container.hpp"
#include "maskseg/error.hpp"
#include "maskseg/rng.hpp"

namespace maskseg {
namespace {

constexpr std::string_view kArchiveMagic = "MKPATCH1";

}  // namespace

void PatchSpec::validate() const {
  if (size < 1) throw ValidationError("patch size must be >= 1");
  if (stride < 1 || stride > size) throw ValidationError("patch stride must satisfy 1 <= stride <= size");
}

std::vector<std::int64_t> plan_axis(std::int64_t dim, std::int64_t size, std::int64_t stride) {
  std::vector<std::int64_t> starts;
  if (dim < size) {
    starts.push_back(0);
    return starts;
  }
  for (std::int64_t s = 0; s + size <= dim; s += stride) starts.push_back(s);
  return starts;
}

std::vector<Window> plan_windows(std::int64_t height, std::int64_t width, const PatchSpec& spec) {
  spec.validate();
  const auto rows = plan_axis(height, spec.size, spec.stride);
  const auto cols = plan_axis(width, spec.size, spec.stride);
  std::vector<Window> out;
  out.reserve(rows.size() * cols.size());
  for (const auto r : rows) {
    for (const auto c : cols) out.push_back({r, c});
  }
  return out;
}

std::vector<Patch> extract_patches(const Raster& image, const Raster& mask, const Raster& label,
                                   const PatchSpec& spec) {
  spec.validate();
  require_same_grid(image.grid(), mask.grid(), "extract_patches (image vs mask)");
  require_same_grid(image.grid(), label.grid(), "extract_patches (image vs labels)");
  if (image.dtype() != DType::u8 || image.bands() != 3) {
    throw ValidationError("image must be a 3-band u8 raster");
  }
  require_binary(mask, "mask");
  require_binary(label, "labels");

  const auto img = image.u8();
  const auto msk = mask.u8();
  const auto lab = label.u8();
  const std::int64_t s = spec.size;
  const auto plane = static_cast<std::size_t>(s * s);

  std::vector<Patch> out;
  for (const auto& w : plan_windows(image.height(), image.width(), spec)) {
    Patch p;
    p.size = s;
    p.row0 = w.row0;
    p.col0 = w.col0;
    p.image.assign(3 * plane, 0.0f);
    p.mask.assign(plane, 0);
    p.label.assign(plane, 0);
    const std::int64_t rows = std::min(s, image.height() - w.row0);
    const std::int64_t cols = std::min(s, image.width() - w.col0);
    for (std::int64_t r = 0; r < rows; ++r) {
      for (std::int64_t c = 0; c < cols; ++c) {
        const auto dst = static_cast<std::size_t>(r * s + c);
        for (int b = 0; b < 3; ++b) {
          p.image[static_cast<std::size_t>(b) * plane + dst] =
              static_cast<float>(img[image.index(b, w.row0 + r, w.col0 + c)]) / 255.0f;
        }
        p.mask[dst] = msk[mask.index(0, w.row0 + r, w.col0 + c)];
        p.label[dst] = lab[label.index(0, w.row0 + r, w.col0 + c)];
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::string_view split_name(Split s) {
  switch (s) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "train";
}

Split split_from_name(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw FormatError("unknown split '" + std::string(name) + "'");
}

void SplitFractions::validate() const {
  const bool finite = std::isfinite(train) && std::isfinite(val) && std::isfinite(test);
  if (!finite || train < 0.0 || val < 0.0 || test < 0.0) {
    throw ValidationError("split fractions must be finite and non-negative");
  }
  if (std::abs(train + val + test - 1.0) > 1e-9) throw ValidationError("split fractions must sum to 1");
}

SplitCounts SplitAssignment::counts() const {
  SplitCounts c;
  for (const auto t : tags) {
    if (t == Split::train) ++c.train;
    if (t == Split::val) ++c.val;
    if (t == Split::test) ++c.test;
  }
  return c;
}

std::vector<std::size_t> SplitAssignment::indices(Split which) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i] == which) out.push_back(i);
  }
  return out;
}

SplitAssignment split_assign(std::size_t n, const SplitFractions& fractions, std::uint64_t seed) {
  fractions.validate();
  const auto n_test = static_cast<std::size_t>(std::floor(fractions.test * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::floor(fractions.val * static_cast<double>(n)));
  const std::size_t n_train = n - n_val - n_test;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 rng(seed);
  for (std::size_t i = n; i-- > 1;) {
    const auto j = static_cast<std::size_t>(rng.next() % (static_cast<std::uint64_t>(i) + 1));
    std::swap(order[i], order[j]);
  }

  SplitAssignment a;
  a.seed = seed;
  a.fractions = fractions;
  a.tags.assign(n, Split::test);
  for (std::size_t k = 0; k < n; ++k) {
    a.tags[order[k]] = k < n_train ? Split::train : (k < n_train + n_val ? Split::val : Split::test);
  }
  return a;
}

std::string archive_encode(const PatchArchive& archive) {
  archive.spec.validate();
  if (archive.assignment.tags.size() != archive.patches.size()) {
    throw ValidationError("split assignment does not match patch count");
  }
  const auto plane = static_cast<std::size_t>(archive.spec.size * archive.spec.size);
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t i = 0; i < archive.patches.size(); ++i) {
    const auto& p = archive.patches[i];
    if (p.size != archive.spec.size || p.image.size() != 3 * plane || p.mask.size() != plane ||
        p.label.size() != plane) {
      throw ValidationError("patch " + std::to_string(i) + " has inconsistent shape");
    }
    entries.push_back({{"row0", p.row0}, {"col0", p.col0},
                       {"split", std::string(split_name(archive.assignment.tags[i]))}});
  }
  const auto& f = archive.assignment.fractions;
  nlohmann::json manifest = {{"size", archive.spec.size},
                             {"stride", archive.spec.stride},
                             {"count", archive.patches.size()},
                             {"seed", archive.assignment.seed},
                             {"fractions", {f.train, f.val, f.test}},
                             {"grid", grid_to_json(archive.grid)},
                             {"entries", std::move(entries)}};
  std::string out = detail::encode_container(kArchiveMagic, manifest);
  out.reserve(out.size() + archive.patches.size() * plane * 14);
  for (const auto& p : archive.patches) {
    detail::append_le(out, std::span<const float>(p.image));
    detail::append_le(out, std::span<const std::uint8_t>(p.mask));
    detail::append_le(out, std::span<const std::uint8_t>(p.label));
  }
  return out;
}

PatchArchive archive_decode(std::string_view bytes) {
  const auto c = detail::decode_container(bytes, kArchiveMagic);
  PatchArchive a;
  a.spec.size = detail::header_field<std::int64_t>(c.header, "size");
  a.spec.stride = detail::header_field<std::int64_t>(c.header, "stride");
  try {
    a.spec.validate();
  } catch (const ValidationError& e) {
    throw FormatError(e.what());
  }
  const auto count = detail::header_field<std::size_t>(c.header, "count");
  a.assignment.seed = detail::header_field<std::uint64_t>(c.header, "seed");
  const auto fr = detail::header_field<std::vector<double>>(c.header, "fractions");
  if (fr.size() != 3) throw FormatError("fractions must have three entries");
  a.assignment.fractions = {fr[0], fr[1], fr[2]};
  if (!c.header.contains("grid")) throw FormatError("header is missing 'grid'");
  a.grid = grid_from_json(c.header["grid"]);
  const auto& entries = c.header.find("entries");
  if (entries == c.header.end() || !entries->is_array() || entries->size() != count) {
    throw FormatError("manifest entries do not match count");
  }

  const auto plane = static_cast<std::size_t>(a.spec.size * a.spec.size);
  const std::size_t per_patch = plane * (3 * sizeof(float) + 2);
  if (c.payload.size() / per_patch < count || c.payload.size() < count * per_patch) {
    throw FormatError("truncated patch payload: expected " + std::to_string(count * per_patch) +
                      " bytes, got " + std::to_string(c.payload.size()));
  }
  if (c.payload.size() > count * per_patch) throw FormatError("trailing bytes after patch payload");

  std::size_t off = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& e = (*entries)[i];
    Patch p;
    p.size = a.spec.size;
    p.row0 = detail::header_field<std::int64_t>(e, "row0");
    p.col0 = detail::header_field<std::int64_t>(e, "col0");
    a.assignment.tags.push_back(split_from_name(detail::header_field<std::string>(e, "split")));
    p.image.resize(3 * plane);
    p.mask.resize(plane);
    p.label.resize(plane);
    detail::read_le(c.payload.substr(off, 3 * plane * sizeof(float)), std::span<float>(p.image));
    off += 3 * plane * sizeof(float);
    detail::read_le(c.payload.substr(off, plane), std::span<std::uint8_t>(p.mask));
    off += plane;
    detail::read_le(c.payload.substr(off, plane), std::span<std::uint8_t>(p.label));
    off += plane;
    a.patches.push_back(std::move(p));
  }
  return a;
}

void archive_write(const PatchArchive& archive, const std::filesystem::path& path) {
  detail::write_file(path, archive_encode(archive));
}

PatchArchive archive_read(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  try {
    return archive_decode(bytes);
  } catch (const FormatError& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
}

}  // namespace maskseg
