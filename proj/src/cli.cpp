#include "maskseg/cli.hpp"

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "container.hpp"
#include "maskseg/error.hpp"
#include "maskseg/geodata.hpp"
#include "maskseg/maskgen.hpp"
#include "maskseg/metrics.hpp"
#include "maskseg/overpass.hpp"
#include "maskseg/patches.hpp"
#include "maskseg/predict.hpp"
#include "maskseg/raster.hpp"
#include "maskseg/synth.hpp"
#include "maskseg/train.hpp"
#include "parse_util.hpp"

namespace maskseg::cli {
namespace {

namespace fs = std::filesystem;

struct FetchArgs {
  std::string bbox, out, endpoint{kDefaultOverpassEndpoint}, classes, proj;
};
struct BuildMaskArgs {
  std::string roads, like, grid, out;
  double buffer = 5.0;
};
struct LabelArgs {
  std::string crowns, like, out;
};
struct ExtractArgs {
  std::string image, mask, labels, out, fractions = "0.6,0.2,0.2";
  std::int64_t size = 256, stride = 128;
  std::uint64_t seed = 0;
};
struct TrainArgs {
  std::string patches, config, out, history;
};
struct PredictArgs {
  std::string model, image, mask, out;
  bool ones = false;
  double threshold = 0.5;
};
struct EvaluateArgs {
  std::string pred, labels, mask;
};
struct SynthArgs {
  std::uint64_t seed = 0;
  std::int64_t width = 512, height = 512;
  int trees = 60, roads = 6;
  std::string out_dir;
};
struct ExportArgs {
  std::string in, out, bands;
};

FeatureSet load_geojson(const std::string& path, std::ostream& err) {
  const auto parsed = parse_geojson(detail::read_file(path));
  if (parsed.skipped) err << path << ": skipped " << parsed.skipped << " unsupported geometries\n";
  return parsed.features;
}

std::string binary_output_path(const std::string& out) {
  fs::path p(out);
  const std::string stem = p.extension() == ".rras" ? p.stem().string() : p.filename().string();
  return (p.parent_path() / (stem + ".binary.rras")).string();
}

void run_fetch(const FetchArgs& a, std::ostream& err) {
  const GeoBBox bbox = GeoBBox::parse(a.bbox);
  const auto classes = a.classes.empty() ? default_highway_classes() : detail::split_list(a.classes);
  LocalProjection proj{0.5 * (bbox.west + bbox.east), 0.5 * (bbox.south + bbox.north)};
  if (!a.proj.empty()) {
    const auto v = detail::parse_number_list(a.proj, "--proj");
    if (v.size() != 2) throw ValidationError("--proj needs lon0,lat0");
    proj = {v[0], v[1]};
  }
  proj.validate();
  const std::string body = fetch_roads(a.endpoint, bbox, classes);
  const FeatureSet roads = parse_overpass_response(body, proj);
  detail::write_file(a.out, to_geojson(roads));
  err << "fetched " << roads.polylines.size() << " ways\n";
}

void run_build_mask(const BuildMaskArgs& a) {
  if (a.like.empty() == a.grid.empty()) throw UsageError("build-mask needs exactly one of --like or --grid");
  const GridTransform grid = a.like.empty() ? read_grid_json(a.grid) : rras_read(a.like).grid();
  std::ostringstream sink;
  const FeatureSet roads = load_geojson(a.roads, sink);
  rras_write(rasterize_buffered_polylines(roads.polylines, grid, BufferSpec{a.buffer}), a.out);
}

void run_labels(const LabelArgs& a, std::ostream& err) {
  const GridTransform grid = rras_read(a.like).grid();
  const FeatureSet crowns = load_geojson(a.crowns, err);
  rras_write(rasterize_polygons(crowns.polygons, grid), a.out);
}

void run_extract(const ExtractArgs& a, std::ostream& err) {
  const auto fr = detail::parse_number_list(a.fractions, "--fractions");
  if (fr.size() != 3) throw ValidationError("--fractions needs three values train,val,test");
  const PatchSpec spec{a.size, a.stride};
  const Raster image = rras_read(a.image);
  PatchArchive archive;
  archive.spec = spec;
  archive.grid = image.grid();
  archive.patches = extract_patches(image, rras_read(a.mask), rras_read(a.labels), spec);
  archive.assignment = split_assign(archive.patches.size(), {fr[0], fr[1], fr[2]}, a.seed);
  archive_write(archive, a.out);
  const auto c = archive.assignment.counts();
  err << "extracted " << archive.patches.size() << " patches (train " << c.train << ", val " << c.val << ", test "
      << c.test << ")\n";
}

void run_train(const TrainArgs& a, std::ostream& err) {
  const TrainConfig config = TrainConfig::read(a.config);
  const PatchArchive archive = archive_read(a.patches);
  const auto result = train(config, archive, [&](const EpochRecord& r) {
    err << "epoch " << r.epoch << " loss " << r.train_loss;
    if (r.val_accuracy) err << " val_accuracy " << *r.val_accuracy;
    err << "\n";
  });
  checkpoint_write(result.params, result.encoding, a.out);
  detail::write_file(a.history, history_jsonl(result.history));
  err << "best epoch " << result.best_epoch << "\n";
}

void run_predict(const PredictArgs& a) {
  if (a.ones == !a.mask.empty()) throw UsageError("predict needs exactly one of --mask or --ones");
  const Checkpoint ck = checkpoint_read(a.model);
  const Raster image = rras_read(a.image);
  std::optional<Raster> mask;
  if (!a.ones) mask = rras_read(a.mask);
  PredictOptions opts;
  opts.threshold = a.threshold;
  const Prediction pred = predict_tiled(ck.params, ck.encoding, image, mask ? &*mask : nullptr, opts);
  rras_write(pred.probability, a.out);
  rras_write(pred.binary, binary_output_path(a.out));
}

void run_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const Raster pred = rras_read(a.pred);
  const Raster labels = rras_read(a.labels);
  const Raster mask = rras_read(a.mask);
  require_same_grid(pred.grid(), labels.grid(), "evaluate (prediction vs labels)");
  require_same_grid(pred.grid(), mask.grid(), "evaluate (prediction vs mask)");
  require_binary(labels, "labels");
  require_binary(mask, "mask");
  if (pred.bands() != 1) throw ValidationError("prediction must be single-band");
  std::vector<float> probs(pred.grid().pixel_count());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    probs[i] = pred.dtype() == DType::f32 ? pred.f32()[i] : static_cast<float>(pred.u8()[i]);
  }
  auto report = evaluate_masked(probs, labels.u8(), mask.u8()).to_json();
  const std::vector<std::uint8_t> ones(probs.size(), 1);
  report["whole_image_accuracy"] = evaluate_masked(probs, labels.u8(), ones).to_json()["accuracy"];
  out << report.dump(2) << "\n";
}

void run_synth(const SynthArgs& a) {
  const auto scene = generate_synthetic_scene(a.seed, a.width, a.height, a.trees, a.roads);
  const fs::path dir(a.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  rras_write(scene.image, dir / "image.rras");
  detail::write_file(dir / "roads.geojson", to_geojson(scene.roads));
  detail::write_file(dir / "crowns.geojson", to_geojson(scene.crowns));
}

void run_export(const ExportArgs& a) {
  const Raster r = rras_read(a.in);
  std::vector<int> bands;
  if (a.bands.empty()) {
    bands = r.bands() >= 3 ? std::vector<int>{0, 1, 2} : std::vector<int>{0};
  } else {
    for (const double v : detail::parse_number_list(a.bands, "--bands")) bands.push_back(static_cast<int>(v));
  }
  PreviewOptions opts;
  // {0,1} rasters (masks, labels, binary predictions) are stretched to 0/255.
  if (r.dtype() == DType::u8) {
    const auto d = r.u8();
    if (std::all_of(d.begin(), d.end(), [](std::uint8_t v) { return v <= 1; })) opts.u8_scale = 255;
  }
  export_preview(r, a.out, bands, opts);
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Masked-label segmentation toolkit: road masks, patches, U-Net training and inference", "maskseg"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough(false);

  FetchArgs fetch;
  auto* c_fetch = app.add_subcommand("fetch-roads", "Download road ways from an Overpass endpoint as GeoJSON");
  c_fetch->add_option("--bbox", fetch.bbox, "S,W,N,E in degrees")->required();
  c_fetch->add_option("--out", fetch.out, "output GeoJSON")->required();
  c_fetch->add_option("--endpoint", fetch.endpoint, "Overpass interpreter URL");
  c_fetch->add_option("--classes", fetch.classes, "comma-separated highway classes")
      ->default_str("motorway,trunk,primary,secondary,tertiary,unclassified,residential");
  c_fetch->add_option("--proj", fetch.proj, "local projection origin lon0,lat0")->default_str("bbox center");

  BuildMaskArgs mask;
  auto* c_mask = app.add_subcommand("build-mask", "Rasterize buffered road polylines into a binary mask");
  c_mask->add_option("--roads", mask.roads, "road GeoJSON (planar meters)")->required();
  auto* like_opt = c_mask->add_option("--like", mask.like, "take the grid from this raster");
  auto* grid_opt = c_mask->add_option("--grid", mask.grid, "grid JSON file");
  like_opt->excludes(grid_opt);
  c_mask->add_option("--buffer", mask.buffer, "buffer radius in meters");
  c_mask->add_option("--out", mask.out, "output mask raster")->required();

  LabelArgs labels;
  auto* c_labels = app.add_subcommand("rasterize-labels", "Burn crown polygons into a binary label raster");
  c_labels->add_option("--crowns", labels.crowns, "crown GeoJSON (planar meters)")->required();
  c_labels->add_option("--like", labels.like, "take the grid from this raster")->required();
  c_labels->add_option("--out", labels.out, "output label raster")->required();

  ExtractArgs extract;
  auto* c_extract = app.add_subcommand("extract-patches", "Slice image/mask/labels into a patch archive");
  c_extract->add_option("--image", extract.image, "3-band u8 image raster")->required();
  c_extract->add_option("--mask", extract.mask, "binary mask raster")->required();
  c_extract->add_option("--labels", extract.labels, "binary label raster")->required();
  c_extract->add_option("--size", extract.size, "patch size in pixels");
  c_extract->add_option("--stride", extract.stride, "window step in pixels");
  c_extract->add_option("--seed", extract.seed, "split seed");
  c_extract->add_option("--fractions", extract.fractions, "train,val,test fractions");
  c_extract->add_option("--out", extract.out, "output patch archive")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train the masked U-Net on a patch archive");
  c_train->add_option("--patches", tr.patches, "patch archive")->required();
  c_train->add_option("--config", tr.config, "training config JSON")->required();
  c_train->add_option("--out", tr.out, "output checkpoint")->required();
  c_train->add_option("--history", tr.history, "per-epoch history (JSON lines)")->required();

  PredictArgs pr;
  auto* c_pred = app.add_subcommand("predict", "Tiled inference; writes probabilities and <out>.binary.rras");
  c_pred->add_option("--model", pr.model, "checkpoint")->required();
  c_pred->add_option("--image", pr.image, "3-band u8 image raster")->required();
  auto* pmask = c_pred->add_option("--mask", pr.mask, "binary mask raster");
  auto* pones = c_pred->add_flag("--ones", pr.ones, "predict everywhere (all-ones mask)");
  pmask->excludes(pones);
  c_pred->add_option("--out", pr.out, "output probability raster")->required();
  c_pred->add_option("--threshold", pr.threshold, "probability threshold for the binary output");

  EvaluateArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "Masked metrics of a prediction raster, printed as JSON");
  c_eval->add_option("--pred", ev.pred, "prediction raster (f32 probabilities or u8 binary)")->required();
  c_eval->add_option("--labels", ev.labels, "binary label raster")->required();
  c_eval->add_option("--mask", ev.mask, "binary mask raster")->required();

  SynthArgs sy;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic scene (image.rras, roads.geojson, crowns.geojson)");
  c_synth->add_option("--seed", sy.seed, "scene seed");
  c_synth->add_option("--width", sy.width, "width in pixels");
  c_synth->add_option("--height", sy.height, "height in pixels");
  c_synth->add_option("--trees", sy.trees, "number of trees");
  c_synth->add_option("--roads", sy.roads, "number of roads");
  c_synth->add_option("--out-dir", sy.out_dir, "output directory")->required();

  ExportArgs ex;
  auto* c_export = app.add_subcommand("export-ppm", "Write a PGM/PPM preview of a raster");
  c_export->add_option("--in", ex.in, "input raster")->required();
  c_export->add_option("--out", ex.out, "output PGM (1 band) or PPM (3 bands)")->required();
  c_export->add_option("--bands", ex.bands, "band indices")->default_str("0,1,2 or 0");

  std::vector<std::string> argv_storage{"maskseg"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << app.help(subs.empty() ? "" : subs.front()->get_name());
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << app.help(subs.empty() ? "" : subs.front()->get_name());
    return 1;
  }

  try {
    if (c_fetch->parsed()) run_fetch(fetch, err);
    if (c_mask->parsed()) run_build_mask(mask);
    if (c_labels->parsed()) run_labels(labels, err);
    if (c_extract->parsed()) run_extract(extract, err);
    if (c_train->parsed()) run_train(tr, err);
    if (c_pred->parsed()) run_predict(pr);
    if (c_eval->parsed()) run_evaluate(ev, out);
    if (c_synth->parsed()) run_synth(sy);
    if (c_export->parsed()) run_export(ex);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

int dispatch(const std::vector<std::string>& args) { return dispatch(args, std::cout, std::cerr); }

}  // namespace maskseg::cli
