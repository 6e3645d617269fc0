#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "maskseg/cli.hpp"
#include "maskseg/error.hpp"
#include "maskseg/geodata.hpp"
#include "maskseg/maskgen.hpp"
#include "maskseg/metrics.hpp"
#include "maskseg/ops.hpp"
#include "maskseg/overpass.hpp"
#include "maskseg/patches.hpp"
#include "maskseg/predict.hpp"
#include "maskseg/raster.hpp"
#include "maskseg/synth.hpp"
#include "maskseg/train.hpp"

namespace py = pybind11;
using namespace maskseg;

namespace {

using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;
using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<Point2> to_points(const F64Array& a) {
  if (a.ndim() != 2 || a.shape(1) != 2) throw ValidationError("coordinates must have shape (n, 2)");
  std::vector<Point2> out(static_cast<std::size_t>(a.shape(0)));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {a.at(i, 0), a.at(i, 1)};
  return out;
}

py::array_t<double> from_points(const std::vector<Point2>& pts) {
  py::array_t<double> a({static_cast<py::ssize_t>(pts.size()), py::ssize_t{2}});
  auto v = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    v(i, 0) = pts[i].x;
    v(i, 1) = pts[i].y;
  }
  return a;
}

std::vector<Polyline> to_polylines(const std::vector<F64Array>& lines) {
  std::vector<Polyline> out;
  for (const auto& l : lines) out.push_back({to_points(l)});
  return out;
}

// A polygon is a list of rings: outer first, then holes.
std::vector<Polygon> to_polygons(const std::vector<std::vector<F64Array>>& polys) {
  std::vector<Polygon> out;
  for (const auto& rings : polys) {
    if (rings.empty()) throw ValidationError("polygon needs an outer ring");
    Polygon p{to_points(rings[0]), {}};
    for (std::size_t i = 1; i < rings.size(); ++i) p.holes.push_back(to_points(rings[i]));
    out.push_back(std::move(p));
  }
  return out;
}

py::list from_features(const FeatureSet& fs, bool polygons) {
  py::list out;
  if (!polygons) {
    for (const auto& l : fs.polylines) out.append(from_points(l.vertices));
    return out;
  }
  for (const auto& p : fs.polygons) {
    py::list rings;
    rings.append(from_points(p.outer));
    for (const auto& h : p.holes) rings.append(from_points(h));
    out.append(rings);
  }
  return out;
}

// [bands, H, W] array copy of a raster.
py::array raster_to_array(const Raster& r) {
  const std::vector<py::ssize_t> shape{r.bands(), r.height(), r.width()};
  if (r.dtype() == DType::u8) {
    py::array_t<std::uint8_t> a(shape);
    std::memcpy(a.mutable_data(), r.u8().data(), r.u8().size());
    return a;
  }
  py::array_t<float> a(shape);
  std::memcpy(a.mutable_data(), r.f32().data(), r.f32().size() * sizeof(float));
  return a;
}

Raster array_to_raster(const py::array& arr, const GridTransform& grid) {
  grid.validate();
  const auto nd = arr.ndim();
  if (nd != 2 && nd != 3) throw ValidationError("raster array must have shape (H, W) or (bands, H, W)");
  const int bands = nd == 2 ? 1 : static_cast<int>(arr.shape(0));
  if (arr.shape(nd - 2) != grid.height || arr.shape(nd - 1) != grid.width) {
    throw ValidationError("array shape does not match grid height/width");
  }
  if (arr.dtype().is(py::dtype::of<std::uint8_t>())) {
    Raster r(grid, bands, DType::u8);
    const U8Array a = arr;
    std::memcpy(r.u8().data(), a.data(), r.u8().size());
    return r;
  }
  Raster r(grid, bands, DType::f32);
  const F32Array a = arr;
  std::memcpy(r.f32().data(), a.data(), r.f32().size() * sizeof(float));
  return r;
}

Raster mask_raster(const U8Array& a, const GridTransform& g) {
  if (a.ndim() != 2) throw ValidationError("mask must have shape (H, W)");
  return array_to_raster(a, g);
}

py::dict metrics_dict(const MetricsReport& r) {
  py::dict d;
  auto opt = [](const std::optional<double>& v) -> py::object { return v ? py::object(py::float_(*v)) : py::object(py::none()); };
  d["accuracy"] = opt(r.accuracy);
  d["precision"] = opt(r.precision);
  d["recall"] = opt(r.recall);
  d["iou"] = opt(r.iou);
  d["tp"] = r.counts.tp;
  d["fp"] = r.counts.fp;
  d["tn"] = r.counts.tn;
  d["fn"] = r.counts.fn;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Masked-loss U-Net segmentation on incomplete labels";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<UsageError>(m, "UsageError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<BoundsError>(m, "BoundsError", base.ptr());
  py::register_exception<NetworkError>(m, "NetworkError", base.ptr());
  py::register_exception<TimeoutError>(m, "TimeoutError", base.ptr());

  py::class_<GridTransform>(m, "Grid")
      .def(py::init([](double ox, double oy, double ps, std::int64_t w, std::int64_t h) {
             GridTransform g{ox, oy, ps, w, h};
             g.validate();
             return g;
           }),
           py::arg("origin_x"), py::arg("origin_y"), py::arg("pixel_size"), py::arg("width"), py::arg("height"))
      .def_readonly("origin_x", &GridTransform::origin_x)
      .def_readonly("origin_y", &GridTransform::origin_y)
      .def_readonly("pixel_size", &GridTransform::pixel_size)
      .def_readonly("width", &GridTransform::width)
      .def_readonly("height", &GridTransform::height)
      .def("__eq__", [](const GridTransform& a, const GridTransform& b) { return a == b; })
      .def("__repr__", [](const GridTransform& g) { return "Grid(" + grid_to_json(g).dump() + ")"; });

  m.def(
      "pixel_center",
      [](const GridTransform& g, std::int64_t row, std::int64_t col) {
        const auto p = pixel_center(g, row, col);
        return py::make_tuple(p.x, p.y);
      },
      py::arg("grid"), py::arg("row"), py::arg("col"));
  m.def(
      "world_to_pixel",
      [](const GridTransform& g, double x, double y) -> py::object {
        const auto rc = world_to_pixel(g, {x, y});
        if (!rc) return py::none();
        return py::make_tuple(rc->row, rc->col);
      },
      py::arg("grid"), py::arg("x"), py::arg("y"));

  m.def(
      "project_wgs84_local",
      [](double lon, double lat, double lon0, double lat0) {
        const LocalProjection proj{lon0, lat0};
        proj.validate();
        const auto p = project_wgs84_local(lon, lat, proj);
        return py::make_tuple(p.x, p.y);
      },
      py::arg("lon"), py::arg("lat"), py::arg("lon0"), py::arg("lat0"));
  m.def(
      "build_overpass_query",
      [](std::array<double, 4> swne, const std::optional<std::vector<std::string>>& classes) {
        const GeoBBox box{swne[0], swne[1], swne[2], swne[3]};
        box.validate();
        return build_overpass_query(box, classes ? *classes : default_highway_classes());
      },
      py::arg("bbox"), py::arg("classes") = py::none());
  m.def(
      "parse_overpass_response",
      [](const std::string& body, double lon0, double lat0) {
        return from_features(parse_overpass_response(body, LocalProjection{lon0, lat0}), false);
      },
      py::arg("body"), py::arg("lon0"), py::arg("lat0"));
  m.def(
      "parse_geojson",
      [](const std::string& text) {
        const auto r = parse_geojson(text);
        py::dict d;
        d["polylines"] = from_features(r.features, false);
        d["polygons"] = from_features(r.features, true);
        d["skipped"] = r.skipped;
        return d;
      },
      py::arg("text"));

  m.def(
      "read_raster",
      [](const std::filesystem::path& path) {
        const auto r = rras_read(path);
        return py::make_tuple(raster_to_array(r), r.grid());
      },
      py::arg("path"), "Returns (array[bands, H, W], Grid).");
  m.def(
      "write_raster",
      [](const std::filesystem::path& path, const py::array& data, const GridTransform& grid) {
        rras_write(array_to_raster(data, grid), path);
      },
      py::arg("path"), py::arg("data"), py::arg("grid"), "uint8 arrays are stored as u8, anything else as f32.");

  m.def(
      "rasterize_buffered_polylines",
      [](const std::vector<F64Array>& lines, const GridTransform& grid, double radius) {
        return raster_to_array(rasterize_buffered_polylines(to_polylines(lines), grid, {radius}))
            .attr("reshape")(grid.height, grid.width);
      },
      py::arg("lines"), py::arg("grid"), py::arg("radius") = 5.0);
  m.def(
      "rasterize_polygons",
      [](const std::vector<std::vector<F64Array>>& polys, const GridTransform& grid) {
        return raster_to_array(rasterize_polygons(to_polygons(polys), grid)).attr("reshape")(grid.height, grid.width);
      },
      py::arg("polygons"), py::arg("grid"));

  m.def(
      "plan_windows",
      [](std::int64_t h, std::int64_t w, std::int64_t size, std::int64_t stride) {
        std::vector<std::pair<std::int64_t, std::int64_t>> out;
        for (const auto& win : plan_windows(h, w, {size, stride})) out.emplace_back(win.row0, win.col0);
        return out;
      },
      py::arg("height"), py::arg("width"), py::arg("size") = 256, py::arg("stride") = 128);
  m.def(
      "split_assign",
      [](std::size_t n, std::array<double, 3> fractions, std::uint64_t seed) {
        const auto a = split_assign(n, {fractions[0], fractions[1], fractions[2]}, seed);
        py::array_t<std::uint8_t> tags(std::vector<py::ssize_t>{static_cast<py::ssize_t>(n)});
        auto v = tags.mutable_unchecked<1>();
        for (std::size_t i = 0; i < n; ++i) v(static_cast<py::ssize_t>(i)) = static_cast<std::uint8_t>(a.tags[i]);
        return tags;
      },
      py::arg("n"), py::arg("fractions") = std::array<double, 3>{0.6, 0.2, 0.2}, py::arg("seed") = 0,
      "Per-index tags: 0 train, 1 val, 2 test.");

  m.def(
      "masked_bce_with_logits",
      [](const F32Array& logits, const F32Array& labels, const F32Array& mask) {
        const Shape s(logits.shape(), logits.shape() + logits.ndim());
        auto tensor = [&](const F32Array& a) {
          const Shape as(a.shape(), a.shape() + a.ndim());
          return Tensor<float>(as, std::vector<float>(a.data(), a.data() + a.size()));
        };
        auto z = parameter(tensor(logits));
        const auto loss = masked_bce_with_logits(z, tensor(labels), tensor(mask));
        backward(loss);
        py::array_t<float> grad(std::vector<py::ssize_t>(s.begin(), s.end()));
        std::memcpy(grad.mutable_data(), z->grad.ptr(), z->grad.numel() * sizeof(float));
        return py::make_tuple(loss->value[0], grad);
      },
      py::arg("logits"), py::arg("labels"), py::arg("mask"), "Returns (loss, d loss / d logits).");
  m.def(
      "evaluate_masked",
      [](const F32Array& probs, const U8Array& labels, const U8Array& mask, double threshold) {
        if (probs.size() != labels.size() || probs.size() != mask.size()) throw ValidationError("size mismatch");
        return metrics_dict(evaluate_masked({probs.data(), static_cast<std::size_t>(probs.size())},
                                            {labels.data(), static_cast<std::size_t>(labels.size())},
                                            {mask.data(), static_cast<std::size_t>(mask.size())}, threshold));
      },
      py::arg("probs"), py::arg("labels"), py::arg("mask"), py::arg("threshold") = 0.5);

  m.def(
      "generate_synthetic_scene",
      [](std::uint64_t seed, std::int64_t width, std::int64_t height, int trees, int roads) {
        const auto s = generate_synthetic_scene(seed, width, height, trees, roads);
        py::dict d;
        d["image"] = raster_to_array(s.image);
        d["grid"] = s.image.grid();
        d["roads"] = from_features(s.roads, false);
        d["crowns"] = from_features(s.crowns, true);
        return d;
      },
      py::arg("seed"), py::arg("width") = 512, py::arg("height") = 512, py::arg("trees") = 60, py::arg("roads") = 6);

  m.def(
      "train",
      [](const std::filesystem::path& archive_path, const std::string& config_json,
         const std::optional<std::filesystem::path>& checkpoint) {
        const auto config = TrainConfig::from_json(nlohmann::json::parse(config_json));
        const auto archive = archive_read(archive_path);
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(config, archive);
        }
        if (checkpoint) checkpoint_write(r.params, r.encoding, *checkpoint);
        py::list history;
        for (const auto& e : r.history) {
          py::dict d;
          d["epoch"] = e.epoch;
          d["train_loss"] = e.train_loss;
          d["val_accuracy"] = e.val_accuracy ? py::object(py::float_(*e.val_accuracy)) : py::none();
          d["val_iou"] = e.val_iou ? py::object(py::float_(*e.val_iou)) : py::none();
          history.append(d);
        }
        return py::make_tuple(history, r.best_epoch);
      },
      py::arg("archive"), py::arg("config_json"), py::arg("checkpoint") = py::none(),
      "Trains on a patch archive; returns (history, best_epoch) and optionally writes the checkpoint.");
  m.def(
      "predict",
      [](const std::filesystem::path& checkpoint, const U8Array& image, const GridTransform& grid,
         const std::optional<U8Array>& mask, std::int64_t tile, std::int64_t stride, double threshold) {
        if (image.ndim() != 3 || image.shape(0) != 3) throw ValidationError("image must have shape (3, H, W)");
        const auto ck = checkpoint_read(checkpoint);
        const auto img = array_to_raster(image, grid);
        std::optional<Raster> m;
        if (mask) m = mask_raster(*mask, grid);
        Prediction p;
        {
          py::gil_scoped_release release;
          p = predict_tiled(ck.params, ck.encoding, img, m ? &*m : nullptr, {tile, stride, threshold});
        }
        return py::make_tuple(raster_to_array(p.probability).attr("reshape")(grid.height, grid.width),
                              raster_to_array(p.binary).attr("reshape")(grid.height, grid.width));
      },
      py::arg("checkpoint"), py::arg("image"), py::arg("grid"), py::arg("mask") = py::none(), py::arg("tile") = 256,
      py::arg("stride") = 128, py::arg("threshold") = 0.5,
      "Tiled inference; mask=None predicts everywhere. Returns (probability, binary).");

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        py::gil_scoped_release release;
        return cli::dispatch(args);
      },
      py::arg("args"), "Runs one command-line invocation and returns its exit code.");
}
