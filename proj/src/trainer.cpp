#include "lulcseg/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "lulcseg/nn/adam.hpp"
#include "lulcseg/rng.hpp"

namespace lulcseg {

using nn::LabelBatch;
using nn::Tensor4f;

void TrainConfig::validate() const {
  require(!phases.empty(), Errc::InvalidArgument, "no training phases");
  for (const auto& p : phases) {
    require(p.lr > 0.0, Errc::InvalidArgument, "learning rate must be > 0");
    require(p.epochs >= 1, Errc::InvalidArgument, "epochs must be >= 1");
  }
  require(batch_size >= 1, Errc::InvalidArgument, "batch size must be >= 1");
  require(checkpoint_every >= 0, Errc::InvalidArgument,
          "checkpoint interval must be >= 0");
}

namespace {

// Pack tiles into a normalized batch tensor and target labels.
void fill_batch(const std::vector<const Tile*>& tiles, float scale,
                Tensor4f& batch, LabelBatch& targets) {
  const int B = static_cast<int>(tiles.size());
  const int T = tiles[0]->size;
  const int bands = tiles[0]->bands;
  batch = Tensor4f(B, bands, T, T);
  targets = LabelBatch(B, T, T);
  for (int i = 0; i < B; ++i) {
    const Tile& tile = *tiles[i];
    float* dst = &batch.v[batch.index(i, 0, 0, 0)];
    for (size_t k = 0; k < tile.image.size(); ++k)
      dst[k] = static_cast<float>(tile.image[k]) * scale;
    int32_t* tdst = &targets.v[targets.index(i, 0, 0)];
    for (size_t k = 0; k < tile.labels.size(); ++k)
      tdst[k] = tile.labels[k];
  }
}

// Per-pixel argmax over logit channels, lowest class on ties.
void argmax_labels(const Tensor4f& logits, std::vector<uint8_t>& out,
                   int item) {
  const int64_t plane = static_cast<int64_t>(logits.h) * logits.w;
  const float* base = &logits.v[logits.index(item, 0, 0, 0)];
  out.resize(plane);
  for (int64_t px = 0; px < plane; ++px) {
    int best = 0;
    float best_val = base[px];
    for (int c = 1; c < logits.c; ++c) {
      const float v = base[c * plane + px];
      if (v > best_val) {
        best_val = v;
        best = c;
      }
    }
    out[px] = static_cast<uint8_t>(best);
  }
}

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> val;
};

SplitIndices resolve_split(const TileSet& tiles, const SplitManifest& split) {
  SplitIndices idx;
  for (size_t i = 0; i < tiles.tiles.size(); ++i) {
    const int id = tiles.tiles[i].id;
    const auto it = split.assignments.find(id);
    require(it != split.assignments.end(), Errc::DimensionMismatch,
            "split manifest does not cover tile " + std::to_string(id));
    (it->second == Split::train ? idx.train : idx.val)
        .push_back(static_cast<int>(i));
  }
  require(!idx.train.empty(), Errc::EmptyTrainingSplit,
          "no tiles assigned to training");
  return idx;
}

void check_tiles_against_model(const Model& model, const TileSet& tiles) {
  require(!tiles.tiles.empty(), Errc::EmptyTileSet, "tile set is empty");
  require(tiles.tile_size == model.config.tile_size, Errc::ShapeMismatch,
          "tile size " + std::to_string(tiles.tile_size) +
              " != model tile size " +
              std::to_string(model.config.tile_size));
  require(tiles.bands == model.config.input_channels, Errc::ChannelMismatch,
          "tile bands != model input channels");
  for (const auto& tile : tiles.tiles) {
    for (uint8_t l : tile.labels) {
      require(l < model.config.num_classes, Errc::LabelOutOfRange,
              "tile label " + std::to_string(l) + " >= num_classes");
    }
  }
}

double oa_over_tiles(const Model& model, const TileSet& tiles,
                     const std::vector<int>& indices, float scale,
                     int batch_size) {
  uint64_t correct = 0;
  uint64_t total = 0;
  std::vector<uint8_t> pred;
  for (size_t pos = 0; pos < indices.size(); pos += batch_size) {
    std::vector<const Tile*> chunk;
    for (size_t k = pos; k < std::min(pos + batch_size, indices.size()); ++k)
      chunk.push_back(&tiles.tiles[indices[k]]);
    Tensor4f batch;
    LabelBatch targets;
    fill_batch(chunk, scale, batch, targets);
    const Tensor4f logits = forward(model, batch, nullptr);
    for (int i = 0; i < static_cast<int>(chunk.size()); ++i) {
      argmax_labels(logits, pred, i);
      const int32_t* tgt = &targets.v[targets.index(i, 0, 0)];
      for (size_t px = 0; px < pred.size(); ++px) {
        correct += (pred[px] == tgt[px]);
        ++total;
      }
    }
  }
  return total ? static_cast<double>(correct) / total : 0.0;
}

}  // namespace

double validation_oa(const Model& model, const TileSet& tiles,
                     const SplitManifest& split, Dtype dtype,
                     int batch_size) {
  const SplitIndices idx = resolve_split(tiles, split);
  const float scale = 1.0f / static_cast<float>(dtype_max(dtype));
  return oa_over_tiles(model, tiles, idx.val, scale, batch_size);
}

TrainResult train(Model& model, const TileSet& tiles,
                  const SplitManifest& split, Dtype dtype,
                  const TrainConfig& config) {
  config.validate();
  check_tiles_against_model(model, tiles);
  const SplitIndices idx = resolve_split(tiles, split);
  const float scale = 1.0f / static_cast<float>(dtype_max(dtype));

  nn::AdamState<float> adam;
  adam.init(model.params);

  std::mt19937_64 rng(config.seed);
  TrainResult result;

  int epoch = 0;
  bool stop = false;
  for (size_t phase_idx = 0; phase_idx < config.phases.size() && !stop;
       ++phase_idx) {
    const TrainPhase& phase = config.phases[phase_idx];
    adam.lr = phase.lr;
    for (int pe = 0; pe < phase.epochs && !stop; ++pe) {
      const auto t0 = std::chrono::steady_clock::now();
      ++epoch;

      std::vector<int> order = idx.train;
      deterministic_shuffle(order, rng);

      double loss_sum = 0.0;
      uint64_t loss_pixels = 0;
      uint64_t correct = 0;
      uint64_t total = 0;
      std::vector<uint8_t> pred;

      for (size_t pos = 0; pos < order.size();
           pos += static_cast<size_t>(config.batch_size)) {
        const size_t last =
            std::min(pos + config.batch_size, order.size());
        std::vector<Tile> transformed;
        std::vector<const Tile*> chunk;
        transformed.reserve(last - pos);
        for (size_t k = pos; k < last; ++k) {
          const Tile& tile = tiles.tiles[order[k]];
          if (config.transform_enabled) {
            const TransformSpec spec = random_transform_spec(rng());
            transformed.push_back(apply_transform(tile, spec, rng()));
            chunk.push_back(&transformed.back());
          } else {
            chunk.push_back(&tile);
          }
        }

        Tensor4f batch;
        LabelBatch targets;
        fill_batch(chunk, scale, batch, targets);

        ForwardTrace trace;
        const Tensor4f logits = forward(model, batch, &trace);
        auto loss = nn::softmax_cross_entropy(logits, targets,
                                              config.ignore_class);
        require(std::isfinite(loss.loss), Errc::NumericFailure,
                "training loss diverged");
        loss_sum += loss.loss * static_cast<double>(loss.counted_pixels);
        loss_pixels += loss.counted_pixels;

        for (int i = 0; i < static_cast<int>(chunk.size()); ++i) {
          argmax_labels(logits, pred, i);
          const int32_t* tgt = &targets.v[targets.index(i, 0, 0)];
          for (size_t px = 0; px < pred.size(); ++px) {
            correct += (pred[px] == tgt[px]);
            ++total;
          }
        }

        const auto grads = backward(model, trace, loss.grad_logits);
        nn::adam_step(model.params, grads, adam);
      }

      EpochRecord record;
      record.epoch = epoch;
      record.phase = static_cast<int>(phase_idx) + 1;
      record.lr = phase.lr;
      record.train_loss =
          loss_pixels ? loss_sum / static_cast<double>(loss_pixels) : 0.0;
      record.train_oa = total ? static_cast<double>(correct) / total : 0.0;
      if (!idx.val.empty()) {
        record.val_oa =
            oa_over_tiles(model, tiles, idx.val, scale, config.batch_size);
        if (!result.best_val_oa || *record.val_oa > *result.best_val_oa) {
          result.best_val_oa = record.val_oa;
          result.best_epoch = epoch;
          result.best_params = model.params;
        }
      }
      record.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      result.history.records.push_back(record);

      if (config.checkpoint_every > 0 && !config.checkpoint_dir.empty() &&
          epoch % config.checkpoint_every == 0) {
        char name[48];
        std::snprintf(name, sizeof(name), "checkpoint_epoch_%04d.bin", epoch);
        save_checkpoint(model, config.checkpoint_dir / name);
      }
      if (config.target_train_oa > 0.0 &&
          record.train_oa >= config.target_train_oa) {
        stop = true;
      }
    }
  }
  return result;
}

namespace {

// Mirror extension; valid for any index >= 0 once folded into [0, 2n).
int reflect_index(int i, int n) {
  const int period = 2 * n;
  int m = i % period;
  return m < n ? m : period - 1 - m;
}

}  // namespace

LabelMap predict_raster(const Model& model, const Raster& raster,
                        const ClassPalette& palette) {
  require(raster.header.bands == model.config.input_channels,
          Errc::ChannelMismatch,
          "raster bands " + std::to_string(raster.header.bands) +
              " != model input channels " +
              std::to_string(model.config.input_channels));
  const int T = model.config.tile_size;
  const int H = raster.header.height;
  const int W = raster.header.width;
  const int tiles_y = (H + T - 1) / T;
  const int tiles_x = (W + T - 1) / T;
  const float scale = 1.0f / static_cast<float>(dtype_max(raster.header.dtype));

  LabelMap out;
  out.width = W;
  out.height = H;
  out.palette = palette;
  out.labels.assign(static_cast<size_t>(W) * H, 0);

  struct Origin {
    int row, col;
  };
  std::vector<Origin> origins;
  for (int ty = 0; ty < tiles_y; ++ty)
    for (int tx = 0; tx < tiles_x; ++tx) origins.push_back({ty * T, tx * T});

  const int batch_size = 8;
  std::vector<uint8_t> pred;
  for (size_t pos = 0; pos < origins.size(); pos += batch_size) {
    const size_t last = std::min(pos + batch_size, origins.size());
    const int B = static_cast<int>(last - pos);
    Tensor4f batch(B, raster.header.bands, T, T);
    for (int i = 0; i < B; ++i) {
      const Origin& o = origins[pos + i];
      for (int b = 0; b < raster.header.bands; ++b) {
        for (int r = 0; r < T; ++r) {
          const int sr = reflect_index(o.row + r, H);
          float* dst = &batch.v[batch.index(i, b, r, 0)];
          for (int c = 0; c < T; ++c) {
            const int sc = reflect_index(o.col + c, W);
            dst[c] = static_cast<float>(raster.at(b, sr, sc)) * scale;
          }
        }
      }
    }
    const Tensor4f logits = forward(model, batch, nullptr);
    for (int i = 0; i < B; ++i) {
      argmax_labels(logits, pred, i);
      const Origin& o = origins[pos + i];
      for (int r = 0; r < T; ++r) {
        if (o.row + r >= H) break;
        const size_t dst = static_cast<size_t>(o.row + r) * W + o.col;
        const int cols = std::min(T, W - o.col);
        std::copy_n(pred.begin() + static_cast<size_t>(r) * T, cols,
                    out.labels.begin() + dst);
      }
    }
  }
  return out;
}

void write_history_csv(const TrainHistory& history,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  require(out.good(), Errc::IoFailure, "cannot write " + path.string());
  out << "epoch,phase,lr,loss,val_oa,seconds\n";
  char buf[160];
  for (const auto& r : history.records) {
    std::string val = "";
    if (r.val_oa) {
      std::snprintf(buf, sizeof(buf), "%.6f", *r.val_oa);
      val = buf;
    }
    std::snprintf(buf, sizeof(buf), "%d,%d,%.8g,%.8g,%s,%.3f", r.epoch,
                  r.phase, r.lr, r.train_loss, val.c_str(), r.seconds);
    out << buf << "\n";
  }
  require(out.good(), Errc::IoFailure, "failed writing " + path.string());
}

}  // namespace lulcseg
