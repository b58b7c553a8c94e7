// Pipeline driver: tile, split, cloudmask, train, predict, evaluate, report,
// and an end-to-end synthetic demo.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "lulcseg/cloudmask.hpp"
#include "lulcseg/metrics.hpp"
#include "lulcseg/nn/parallel.hpp"
#include "lulcseg/raster.hpp"
#include "lulcseg/segnet.hpp"
#include "lulcseg/synthetic.hpp"
#include "lulcseg/tiling.hpp"
#include "lulcseg/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace lulcseg;

namespace {

struct PipelineConfig {
  ModelConfig model;
  TrainConfig train;
};

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  if (j.contains("phases")) {
    cfg.phases.clear();
    for (const auto& p : j.at("phases"))
      cfg.phases.push_back(
          {p.at("lr").get<double>(), p.at("epochs").get<int>()});
  }
  if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<int>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
  if (j.contains("transform"))
    cfg.transform_enabled = j.at("transform").get<bool>();
  if (j.contains("checkpoint_every"))
    cfg.checkpoint_every = j.at("checkpoint_every").get<int>();
  if (j.contains("ignore_class") && !j.at("ignore_class").is_null())
    cfg.ignore_class = j.at("ignore_class").get<int>();
  if (j.contains("target_train_oa"))
    cfg.target_train_oa = j.at("target_train_oa").get<double>();
  return cfg;
}

json train_config_to_json(const TrainConfig& cfg) {
  json j;
  j["phases"] = json::array();
  for (const auto& p : cfg.phases)
    j["phases"].push_back({{"lr", p.lr}, {"epochs", p.epochs}});
  j["batch_size"] = cfg.batch_size;
  j["seed"] = cfg.seed;
  j["transform"] = cfg.transform_enabled;
  j["checkpoint_every"] = cfg.checkpoint_every;
  j["ignore_class"] =
      cfg.ignore_class ? json(*cfg.ignore_class) : json(nullptr);
  j["target_train_oa"] = cfg.target_train_oa;
  return j;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  PipelineConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  require(in.good(), Errc::ConfigParse, "cannot open config " + path);
  json j;
  try {
    in >> j;
    if (j.contains("model"))
      cfg.model = ModelConfig::from_json(j.at("model").dump());
    if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"));
  } catch (const json::exception& e) {
    fail(Errc::ConfigParse, std::string("config: ") + e.what());
  }
  return cfg;
}

ClassPalette palette_for_classes(int classes) {
  return classes == 17 ? ClassPalette::nalcms17()
                       : ClassPalette::synthetic(classes);
}

// ---------------------------------------------------------------------------
// Subcommand bodies.

int cmd_tile(const std::string& raster_path, const std::string& labels_path,
             const std::string& out_dir, int tile_size, int stride,
             double min_valid) {
  const Raster raster = load_raster(raster_path);
  const LabelMap labels = load_label_map(labels_path);
  const TileSet set =
      tile_mosaic(raster, labels, tile_size, stride, min_valid);

  TileStore store;
  store.tiles = set;
  store.palette = labels.palette;
  store.dtype = raster.header.dtype;
  store.nodata = raster.header.nodata;
  save_tile_store(store, out_dir);
  std::cout << "tiles: " << set.tiles.size() << " (" << tile_size << "px, stride "
            << stride << ") -> " << out_dir << "\n";
  return 0;
}

int cmd_split(const std::string& store_dir, double ratio, uint64_t seed) {
  const TileStore store = load_tile_store(store_dir);
  const SplitManifest manifest = stratified_split(store.tiles, ratio, seed);
  update_store_split(store_dir, manifest);
  std::cout << "split: " << manifest.count(Split::train) << " train / "
            << manifest.count(Split::validation) << " validation\n";
  return 0;
}

int cmd_cloudmask(const std::string& input, const std::string& out,
                  const std::string& method, int blue_band, int qa_band,
                  int cloud_bit, const std::string& conf_bits, int conf_min,
                  bool no_confidence) {
  const Raster raster = load_raster(input);
  CloudMask mask;
  if (method == "otsu") {
    mask = cloud_mask_otsu(raster, blue_band);
  } else if (method == "qa") {
    QaBitSpec spec;
    spec.cloud_bit = cloud_bit;
    spec.confidence_min = conf_min;
    if (no_confidence) {
      spec.confidence_bits.reset();
    } else if (!conf_bits.empty()) {
      const auto comma = conf_bits.find(',');
      require(comma != std::string::npos, Errc::InvalidArgument,
              "--conf-bits expects LO,HI");
      spec.confidence_bits = {std::stoi(conf_bits.substr(0, comma)),
                              std::stoi(conf_bits.substr(comma + 1))};
    }
    const auto plane = extract_band(raster, qa_band);
    mask = cloud_mask_qa(plane, raster.header.width, raster.header.height,
                         spec, dtype_bits(raster.header.dtype));
  } else {
    fail(Errc::InvalidArgument, "--method must be otsu or qa");
  }
  save_label_map(mask_to_labels(mask), out);
  std::cout << "cloud pixels: " << mask.cloud_pixels() << " / "
            << mask.flags.size() << " -> " << out << "\n";
  return 0;
}

int cmd_train(const std::string& store_dir, const std::string& out_dir,
              PipelineConfig cfg) {
  const TileStore store = load_tile_store(store_dir);
  require(store.split.has_value(), Errc::ConfigParse,
          "tile store has no split; run the split stage first");

  cfg.model.tile_size = store.tiles.tile_size;
  cfg.model.input_channels = store.tiles.bands;
  cfg.model.num_classes = store.palette.size();

  fs::create_directories(out_dir);
  cfg.train.checkpoint_dir = out_dir;

  Model model = build_model(cfg.model, cfg.train.seed);
  const TrainResult result =
      train(model, store.tiles, *store.split, store.dtype, cfg.train);

  save_checkpoint(model, fs::path(out_dir) / "checkpoint_final.bin");
  if (!result.best_params.empty()) {
    Model best = model;
    best.params = result.best_params;
    save_checkpoint(best, fs::path(out_dir) / "checkpoint_best.bin");
  }
  write_history_csv(result.history, fs::path(out_dir) / "history.csv");

  const auto& last = result.history.records.back();
  std::cout << "epochs: " << last.epoch << ", final train OA "
            << last.train_oa;
  if (last.val_oa) std::cout << ", val OA " << *last.val_oa;
  if (result.best_val_oa)
    std::cout << " (best val OA " << *result.best_val_oa << " @ epoch "
              << result.best_epoch << ")";
  std::cout << "\n";
  return 0;
}

int cmd_predict(const std::string& checkpoint, const std::string& raster_path,
                const std::string& out) {
  const Model model = load_checkpoint(checkpoint);
  const Raster raster = load_raster(raster_path);
  const LabelMap pred = predict_raster(
      model, raster, palette_for_classes(model.config.num_classes));
  save_label_map(pred, out);
  std::cout << "prediction -> " << out << "\n";
  return 0;
}

int cmd_evaluate(const std::string& pred_path, const std::string& truth_path,
                 const std::string& out_dir, bool per_tile, int tile_size,
                 bool frequencies) {
  const LabelMap pred = load_label_map(pred_path);
  const LabelMap truth = load_label_map(truth_path);
  require(pred.width == truth.width && pred.height == truth.height,
          Errc::DimensionMismatch, "prediction and truth dims differ");
  const int classes = truth.palette.size();

  fs::create_directories(out_dir);
  MetricsReport report;
  ConfusionMatrix cm = confusion(pred, truth, classes);
  if (per_tile) {
    // Disjoint tiling of both maps; per-tile reports aggregated by pixel
    // share. Any trailing margin is evaluated as one extra strip.
    std::vector<MetricsReport> reports;
    std::vector<double> weights;
    uint64_t total = 0;
    for (int r0 = 0; r0 + tile_size <= truth.height; r0 += tile_size) {
      for (int c0 = 0; c0 + tile_size <= truth.width; c0 += tile_size) {
        ConfusionMatrix tile_cm(classes);
        for (int r = 0; r < tile_size; ++r)
          for (int c = 0; c < tile_size; ++c)
            ++tile_cm.at(truth.at(r0 + r, c0 + c), pred.at(r0 + r, c0 + c));
        reports.push_back(report_from_confusion(tile_cm));
        weights.push_back(static_cast<double>(tile_cm.total()));
        total += tile_cm.total();
      }
    }
    require(!reports.empty(), Errc::EmptyReportList,
            "maps are smaller than one evaluation tile");
    for (auto& w : weights) w /= static_cast<double>(total);
    report = aggregate(reports, weights);
  } else {
    report = report_from_confusion(cm);
  }

  write_confusion_csv(cm, fs::path(out_dir) / "confusion.csv");
  write_per_class_csv(report, truth.palette,
                      fs::path(out_dir) / "per_class.csv");
  write_summary_json(report, fs::path(out_dir) / "summary.json");
  if (frequencies) {
    write_frequency_csv(class_frequencies(truth), truth.palette,
                        fs::path(out_dir) / "frequencies.csv");
  }
  std::cout << summary_json(report);
  return 0;
}

int cmd_report(const std::string& labels_path, const std::string& out) {
  const LabelMap labels = load_label_map(labels_path);
  write_frequency_csv(class_frequencies(labels), labels.palette, out);
  std::cout << "class frequencies -> " << out << "\n";
  return 0;
}

int cmd_demo(const std::string& out_dir, uint64_t seed, bool quick) {
  fs::create_directories(out_dir);
  const fs::path out(out_dir);

  // Synthetic scene: 4 land classes plus nodata, clouds stamped on top.
  const int extent = quick ? 256 : 448;
  SyntheticScene scene =
      make_blob_scene(extent, extent, 3, 5, seed, Dtype::u8, true);
  add_cloud_patches(scene.raster, seed ^ 0xc1a0d5ull, quick ? 3 : 6);
  save_raster(scene.raster, out / "scene.bsq");

  // Cloud labels via thresholding on the blue band, merged as a new class.
  ClassPalette palette = ClassPalette::synthetic(6);
  palette.entries[5].name = "Cloud";
  scene.labels.palette = palette;
  const CloudMask mask = cloud_mask_otsu(scene.raster, 0);
  merge_cloud_labels(scene.labels, mask, 5);
  save_label_map(scene.labels, out / "truth.bsq");

  // Tile, split, train.
  const TileSet tiles = tile_mosaic(scene.raster, scene.labels, 64, 64);
  const SplitManifest split = stratified_split(tiles, 0.9, seed);
  TileStore store;
  store.tiles = tiles;
  store.split = split;
  store.palette = palette;
  store.dtype = Dtype::u8;
  store.nodata = 0;
  save_tile_store(store, out / "tiles");

  ModelConfig mc;
  mc.num_classes = 6;
  mc.input_channels = 3;
  mc.encoder_widths = {12, 24, 48};
  mc.convs_per_stage = 2;
  mc.output_stride = 4;
  mc.tile_size = 64;

  TrainConfig tc;
  tc.phases = quick ? std::vector<TrainPhase>{{1e-3, 4}, {1e-4, 2}}
                    : std::vector<TrainPhase>{{1e-3, 8}, {1e-4, 4}};
  tc.batch_size = 8;
  tc.seed = seed;
  tc.transform_enabled = true;

  Model model = build_model(mc, seed);
  const TrainResult result = train(model, tiles, split, Dtype::u8, tc);
  save_checkpoint(model, out / "checkpoint_final.bin");
  if (!result.best_params.empty()) {
    Model best = model;
    best.params = result.best_params;
    save_checkpoint(best, out / "checkpoint_best.bin");
  }
  write_history_csv(result.history, out / "history.csv");

  // Predict the full mosaic and score it.
  const LabelMap pred = predict_raster(model, scene.raster, palette);
  save_label_map(pred, out / "predicted.bsq");

  const ConfusionMatrix cm = confusion(pred, scene.labels, 6);
  const MetricsReport report = report_from_confusion(cm);
  write_confusion_csv(cm, out / "confusion.csv");
  write_per_class_csv(report, palette, out / "per_class.csv");
  write_summary_json(report, out / "summary.json");
  write_frequency_csv(class_frequencies(scene.labels), palette,
                      out / "frequencies.csv");
  std::cout << summary_json(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Land-cover segmentation pipeline on bsq rasters"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads,
                 "worker threads (default: hardware concurrency)");

  // tile
  auto* tile = app.add_subcommand("tile", "cut a raster+labels mosaic into tiles");
  std::string tile_raster, tile_labels, tile_out;
  int tile_size = 224, tile_stride = 224;
  double min_valid = 0.0;
  tile->add_option("--raster", tile_raster)->required();
  tile->add_option("--labels", tile_labels)->required();
  tile->add_option("--out", tile_out)->required();
  tile->add_option("--tile-size", tile_size);
  tile->add_option("--stride", tile_stride);
  tile->add_option("--min-valid-fraction", min_valid,
                   "drop tiles with fewer valid pixels than this share");

  // split
  auto* split = app.add_subcommand("split", "assign stratified train/validation splits");
  std::string split_dir;
  double split_ratio = 0.9;
  uint64_t split_seed = 0;
  split->add_option("--tiles", split_dir)->required();
  split->add_option("--ratio", split_ratio, "training fraction");
  split->add_option("--seed", split_seed);

  // cloudmask
  auto* cloud = app.add_subcommand("cloudmask", "generate cloud labels");
  std::string cloud_in, cloud_out, cloud_method = "otsu", conf_bits = "";
  int blue_band = 0, qa_band = 0, cloud_bit = 4, conf_min = 3;
  bool no_confidence = false;
  cloud->add_option("--input", cloud_in)->required();
  cloud->add_option("--out", cloud_out)->required();
  cloud->add_option("--method", cloud_method, "otsu|qa");
  cloud->add_option("--blue-band", blue_band);
  cloud->add_option("--qa-band", qa_band);
  cloud->add_option("--cloud-bit", cloud_bit);
  cloud->add_option("--conf-bits", conf_bits, "LO,HI confidence bit range");
  cloud->add_option("--conf-min", conf_min);
  cloud->add_flag("--no-conf", no_confidence, "ignore confidence bits");

  // train
  auto* train_cmd = app.add_subcommand("train", "train on a tile store");
  std::string train_tiles, train_out, train_config;
  uint64_t train_seed = 0;
  int train_batch = 0, train_os = 0;
  std::string train_decoder;
  train_cmd->add_option("--tiles", train_tiles)->required();
  train_cmd->add_option("--out", train_out)->required();
  train_cmd->add_option("--config", train_config, "pipeline config JSON");
  train_cmd->add_option("--seed", train_seed);
  train_cmd->add_option("--batch-size", train_batch);
  train_cmd->add_option("--output-stride", train_os);
  train_cmd->add_option("--decoder", train_decoder,
                        "modified_unet|plain_unet");

  // predict
  auto* predict = app.add_subcommand("predict", "predict a full raster");
  std::string predict_model, predict_raster_path, predict_out;
  predict->add_option("--model", predict_model)->required();
  predict->add_option("--raster", predict_raster_path)->required();
  predict->add_option("--out", predict_out)->required();

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "score a prediction against truth");
  std::string eval_pred, eval_truth, eval_out;
  bool eval_per_tile = false, eval_freq = false;
  int eval_tile_size = 224;
  eval->add_option("--pred", eval_pred)->required();
  eval->add_option("--truth", eval_truth)->required();
  eval->add_option("--out", eval_out)->required();
  eval->add_flag("--per-tile", eval_per_tile,
                 "aggregate per-tile reports instead of pooling");
  eval->add_option("--tile-size", eval_tile_size);
  eval->add_flag("--frequencies", eval_freq, "also emit class frequencies");

  // report
  auto* report = app.add_subcommand("report", "class-frequency table for a label map");
  std::string report_labels, report_out;
  report->add_option("--labels", report_labels)->required();
  report->add_option("--out", report_out)->required();

  // demo
  auto* demo = app.add_subcommand("demo", "synthetic end-to-end pipeline run");
  std::string demo_out = "demo_out";
  uint64_t demo_seed = 7;
  bool demo_quick = false;
  demo->add_option("--out", demo_out);
  demo->add_option("--seed", demo_seed);
  demo->add_flag("--quick", demo_quick, "smaller scene and fewer epochs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  nn::set_threads(threads);
  try {
    if (*tile)
      return cmd_tile(tile_raster, tile_labels, tile_out, tile_size,
                      tile_stride, min_valid);
    if (*split) return cmd_split(split_dir, split_ratio, split_seed);
    if (*cloud)
      return cmd_cloudmask(cloud_in, cloud_out, cloud_method, blue_band,
                           qa_band, cloud_bit, conf_bits, conf_min,
                           no_confidence);
    if (*train_cmd) {
      PipelineConfig cfg = load_pipeline_config(train_config);
      if (train_cmd->count("--seed")) cfg.train.seed = train_seed;
      if (train_batch > 0) cfg.train.batch_size = train_batch;
      if (train_os > 0) cfg.model.output_stride = train_os;
      if (!train_decoder.empty())
        cfg.model.decoder_variant = decoder_from_name(train_decoder);
      return cmd_train(train_tiles, train_out, cfg);
    }
    if (*predict)
      return cmd_predict(predict_model, predict_raster_path, predict_out);
    if (*eval)
      return cmd_evaluate(eval_pred, eval_truth, eval_out, eval_per_tile,
                          eval_tile_size, eval_freq);
    if (*report) return cmd_report(report_labels, report_out);
    if (*demo) return cmd_demo(demo_out, demo_seed, demo_quick);
    fail(Errc::UnknownSubcommand, "no subcommand given");
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
