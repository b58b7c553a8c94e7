#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lulcseg/segnet.hpp"
#include "lulcseg/tiling.hpp"

namespace lulcseg {

struct TrainPhase {
  double lr = 1e-4;
  int epochs = 1;
};

struct TrainConfig {
  // Two-phase schedule by default: eta and eta/10.
  std::vector<TrainPhase> phases = {{1e-4, 30}, {1e-5, 30}};
  int batch_size = 8;
  uint64_t seed = 0;
  bool transform_enabled = true;
  int checkpoint_every = 0;  // epochs; 0 disables periodic checkpoints
  std::filesystem::path checkpoint_dir;
  std::optional<int> ignore_class;  // class excluded from the loss
  double target_train_oa = 0.0;     // early stop once reached; 0 = off

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based, counted across phases
  int phase = 0;  // 1-based
  double lr = 0.0;
  double train_loss = 0.0;
  double train_oa = 0.0;
  std::optional<double> val_oa;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> records;
};

struct TrainResult {
  TrainHistory history;
  // Snapshot of the epoch with the best validation OA (first such epoch on
  // ties); empty when there is no validation split.
  std::vector<nn::Tensor4f> best_params;
  std::optional<double> best_val_oa;
  int best_epoch = -1;
};

// Runs the phase schedule on the training split, reshuffling every epoch and
// drawing a fresh transform per tile per epoch when enabled. Mutates the
// model parameters in place. Deterministic for a fixed seed.
TrainResult train(Model& model, const TileSet& tiles,
                  const SplitManifest& split, Dtype dtype,
                  const TrainConfig& config);

double validation_oa(const Model& model, const TileSet& tiles,
                     const SplitManifest& split, Dtype dtype,
                     int batch_size = 8);

// Full-mosaic inference: reflection-pad to a whole number of tiles, predict
// tile by tile, take the per-pixel argmax (ties toward the lowest class),
// and stitch back to the raster extent.
LabelMap predict_raster(const Model& model, const Raster& raster,
                        const ClassPalette& palette);

void write_history_csv(const TrainHistory& history,
                       const std::filesystem::path& path);

}  // namespace lulcseg
