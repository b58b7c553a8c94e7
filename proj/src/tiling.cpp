#include "lulcseg/tiling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <json.hpp>

#include "lulcseg/rng.hpp"

namespace lulcseg {

using json = nlohmann::ordered_json;

int Tile::dominant_class() const {
  std::array<uint64_t, 256> counts{};
  for (uint8_t l : labels) ++counts[l];
  int best = 0;
  for (int c = 1; c < 256; ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return best;
}

size_t SplitManifest::count(Split s) const {
  size_t n = 0;
  for (const auto& [id, split] : assignments) n += (split == s);
  return n;
}

uint64_t tile_count(int height, int width, int tile_size, int stride) {
  require(tile_size >= 1 && stride >= 1, Errc::InvalidArgument,
          "tile size and stride must be >= 1");
  require(height >= tile_size && width >= tile_size,
          Errc::TileLargerThanMosaic, "tile larger than mosaic");
  const uint64_t rows = (height - tile_size) / stride + 1;
  const uint64_t cols = (width - tile_size) / stride + 1;
  return rows * cols;
}

TileSet tile_mosaic(const Raster& raster, const LabelMap& labels,
                    int tile_size, int stride, double min_valid_fraction) {
  require(raster.header.width == labels.width &&
              raster.header.height == labels.height,
          Errc::DimensionMismatch, "raster and label dims differ");
  const int H = raster.header.height;
  const int W = raster.header.width;
  const int B = raster.header.bands;
  require(tile_size <= std::min(H, W), Errc::TileLargerThanMosaic,
          "tile " + std::to_string(tile_size) + " exceeds mosaic " +
              std::to_string(H) + "x" + std::to_string(W));
  require(stride >= 1, Errc::InvalidArgument, "stride must be >= 1");

  TileSet set;
  set.tile_size = tile_size;
  set.stride = stride;
  set.source_height = H;
  set.source_width = W;
  set.bands = B;

  const auto nodata = raster.header.nodata;
  int next_id = 0;
  for (int r0 = 0; r0 + tile_size <= H; r0 += stride) {
    for (int c0 = 0; c0 + tile_size <= W; c0 += stride) {
      Tile tile;
      tile.id = next_id++;
      tile.origin_row = r0;
      tile.origin_col = c0;
      tile.size = tile_size;
      tile.bands = B;
      tile.image.resize(static_cast<size_t>(B) * tile_size * tile_size);
      tile.labels.resize(static_cast<size_t>(tile_size) * tile_size);
      for (int b = 0; b < B; ++b) {
        for (int r = 0; r < tile_size; ++r) {
          const size_t src = raster.index(b, r0 + r, c0);
          const size_t dst = tile.image_index(b, r, 0);
          std::copy_n(raster.samples.begin() + src, tile_size,
                      tile.image.begin() + dst);
        }
      }
      for (int r = 0; r < tile_size; ++r) {
        const size_t src = labels.index(r0 + r, c0);
        std::copy_n(labels.labels.begin() + src, tile_size,
                    tile.labels.begin() + tile.label_index(r, 0));
      }
      if (min_valid_fraction > 0.0 && nodata) {
        // Valid = any band differs from nodata at that pixel.
        uint64_t valid = 0;
        const size_t plane = static_cast<size_t>(tile_size) * tile_size;
        for (size_t p = 0; p < plane; ++p) {
          bool any = false;
          for (int b = 0; b < B && !any; ++b)
            any = tile.image[b * plane + p] != *nodata;
          valid += any;
        }
        if (static_cast<double>(valid) / plane < min_valid_fraction) {
          --next_id;
          continue;
        }
      }
      set.tiles.push_back(std::move(tile));
    }
  }
  return set;
}

SplitManifest stratified_split(const TileSet& tileset, double ratio,
                               uint64_t seed) {
  require(!tileset.tiles.empty(), Errc::EmptyTileSet, "no tiles to split");
  require(ratio > 0.0 && ratio < 1.0, Errc::InvalidArgument,
          "split ratio must lie in (0, 1)");

  std::map<int, std::vector<int>> strata;  // dominant class -> tile ids
  for (const auto& tile : tileset.tiles)
    strata[tile.dominant_class()].push_back(tile.id);

  SplitManifest manifest;
  manifest.ratio = ratio;
  manifest.seed = seed;
  for (auto& [cls, ids] : strata) {
    std::sort(ids.begin(), ids.end());
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + cls);
    deterministic_shuffle(ids, rng);
    const auto n = ids.size();
    size_t n_val = static_cast<size_t>(
        std::llround((1.0 - ratio) * static_cast<double>(n)));
    if (n_val >= n) n_val = n - 1;  // a stratum keeps at least one train tile
    for (size_t i = 0; i < n; ++i)
      manifest.assignments[ids[i]] =
          i < n_val ? Split::validation : Split::train;
  }
  return manifest;
}

namespace {

struct Geometry {
  int size;
  // Maps output (r, c) to source (r, c) for rotation+flips.
  int rot, hflip, vflip;

  std::pair<int, int> source(int r, int c) const {
    // Undo vflip, then hflip, then rotation (outputs were produced in the
    // order rotate, hflip, vflip).
    if (vflip) r = size - 1 - r;
    if (hflip) c = size - 1 - c;
    for (int k = 0; k < rot; ++k) {
      // Inverse of one clockwise quarter turn: out(r,c) = in(size-1-c, r).
      const int sr = size - 1 - c;
      const int sc = r;
      r = sr;
      c = sc;
    }
    return {r, c};
  }
};

}  // namespace

Tile apply_transform(const Tile& tile, const TransformSpec& spec,
                     uint64_t seed) {
  require(spec.rotation_quarters >= 0 && spec.rotation_quarters < 4,
          Errc::InvalidArgument, "rotation must be 0..3 quarter turns");
  if (spec.zoom) {
    require(*spec.zoom >= 0.7 && *spec.zoom < 1.0, Errc::InvalidZoomFraction,
            "zoom fraction " + std::to_string(*spec.zoom) +
                " outside [0.7, 1.0)");
  }
  const int T = tile.size;
  const int B = tile.bands;
  Tile out = tile;

  if (spec.rotation_quarters || spec.hflip || spec.vflip) {
    const Geometry geom{T, spec.rotation_quarters, spec.hflip, spec.vflip};
    for (int r = 0; r < T; ++r) {
      for (int c = 0; c < T; ++c) {
        const auto [sr, sc] = geom.source(r, c);
        for (int b = 0; b < B; ++b)
          out.image[out.image_index(b, r, c)] =
              tile.image[tile.image_index(b, sr, sc)];
        out.labels[out.label_index(r, c)] =
            tile.labels[tile.label_index(sr, sc)];
      }
    }
  }

  if (spec.zoom) {
    const int crop = std::max(1, static_cast<int>(std::lround(*spec.zoom * T)));
    std::mt19937_64 rng(seed);
    const int max_off = T - crop;
    const int r0 = max_off > 0 ? static_cast<int>(rng() % (max_off + 1)) : 0;
    const int c0 = max_off > 0 ? static_cast<int>(rng() % (max_off + 1)) : 0;

    const Tile base = out;
    const double scale = static_cast<double>(crop) / T;
    for (int r = 0; r < T; ++r) {
      const double sr = r0 + (r + 0.5) * scale - 0.5;
      for (int c = 0; c < T; ++c) {
        const double sc = c0 + (c + 0.5) * scale - 0.5;
        // Bilinear for image bands, clamped to the crop window.
        const double fr = std::clamp(sr, static_cast<double>(r0),
                                     static_cast<double>(r0 + crop - 1));
        const double fc = std::clamp(sc, static_cast<double>(c0),
                                     static_cast<double>(c0 + crop - 1));
        const int ir = static_cast<int>(fr);
        const int ic = static_cast<int>(fc);
        const int ir1 = std::min(ir + 1, r0 + crop - 1);
        const int ic1 = std::min(ic + 1, c0 + crop - 1);
        const double wr = fr - ir;
        const double wc = fc - ic;
        for (int b = 0; b < B; ++b) {
          const double v00 = base.image[base.image_index(b, ir, ic)];
          const double v01 = base.image[base.image_index(b, ir, ic1)];
          const double v10 = base.image[base.image_index(b, ir1, ic)];
          const double v11 = base.image[base.image_index(b, ir1, ic1)];
          const double v = (1 - wr) * ((1 - wc) * v00 + wc * v01) +
                           wr * ((1 - wc) * v10 + wc * v11);
          out.image[out.image_index(b, r, c)] =
              static_cast<uint16_t>(std::lround(v));
        }
        // Nearest for labels.
        const int nr = std::clamp(static_cast<int>(std::lround(fr)), r0,
                                  r0 + crop - 1);
        const int nc = std::clamp(static_cast<int>(std::lround(fc)), c0,
                                  c0 + crop - 1);
        out.labels[out.label_index(r, c)] =
            base.labels[base.label_index(nr, nc)];
      }
    }
  }
  return out;
}

TransformSpec random_transform_spec(uint64_t seed) {
  std::mt19937_64 rng(seed);
  TransformSpec spec;
  spec.rotation_quarters = static_cast<int>(rng() % 4);
  spec.hflip = rng() % 2;
  spec.vflip = rng() % 2;
  if (rng() % 2) {
    // Uniform in [0.7, 1.0) from the top 53 bits.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    spec.zoom = 0.7 + 0.3 * u;
  }
  return spec;
}

StitchResult stitch(const std::vector<Tile>& tiles, int tile_size,
                    int source_height, int source_width,
                    const ClassPalette& palette) {
  const int H = source_height;
  const int W = source_width;
  const size_t plane = static_cast<size_t>(H) * W;
  const int classes = palette.size();

  std::vector<uint8_t> coverage(plane, 0);
  bool overlap = false;
  for (const auto& tile : tiles) {
    require(tile.origin_row >= 0 && tile.origin_col >= 0 &&
                tile.origin_row + tile_size <= H &&
                tile.origin_col + tile_size <= W,
            Errc::DimensionMismatch, "tile extends beyond mosaic extent");
    for (int r = 0; r < tile_size; ++r) {
      const size_t base =
          static_cast<size_t>(tile.origin_row + r) * W + tile.origin_col;
      for (int c = 0; c < tile_size; ++c) {
        uint8_t& cov = coverage[base + c];
        if (cov == 1) overlap = true;
        if (cov < 2) ++cov;
      }
    }
  }

  StitchResult result;
  result.map.width = W;
  result.map.height = H;
  result.map.palette = palette;
  result.map.labels.assign(plane, 0);

  if (!overlap) {
    for (const auto& tile : tiles) {
      for (int r = 0; r < tile_size; ++r) {
        const size_t dst =
            static_cast<size_t>(tile.origin_row + r) * W + tile.origin_col;
        std::copy_n(tile.labels.begin() + tile.label_index(r, 0), tile_size,
                    result.map.labels.begin() + dst);
      }
    }
  } else {
    // Accumulated per-class votes; commutative, so tile order is irrelevant.
    std::vector<uint16_t> votes(plane * classes, 0);
    for (const auto& tile : tiles) {
      for (int r = 0; r < tile_size; ++r) {
        for (int c = 0; c < tile_size; ++c) {
          const size_t px =
              (static_cast<size_t>(tile.origin_row + r)) * W +
              tile.origin_col + c;
          const uint8_t cls = tile.labels[tile.label_index(r, c)];
          require(cls < classes, Errc::LabelOutOfRange,
                  "tile label outside palette");
          ++votes[px * classes + cls];
        }
      }
    }
    for (size_t px = 0; px < plane; ++px) {
      if (!coverage[px]) continue;
      int best = 0;
      uint16_t best_votes = votes[px * classes];
      for (int c = 1; c < classes; ++c) {
        if (votes[px * classes + c] > best_votes) {
          best_votes = votes[px * classes + c];
          best = c;
        }
      }
      result.map.labels[px] = static_cast<uint8_t>(best);
    }
  }

  for (size_t px = 0; px < plane; ++px)
    result.uncovered_pixels += (coverage[px] == 0);
  return result;
}

namespace {

std::string tile_image_name(int id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "img_%05d.bsq", id);
  return buf;
}

std::string tile_label_name(int id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "lab_%05d.bsq", id);
  return buf;
}

}  // namespace

void save_tile_store(const TileStore& store,
                     const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, Errc::IoFailure, "cannot create " + dir.string());

  json manifest;
  manifest["tile_size"] = store.tiles.tile_size;
  manifest["stride"] = store.tiles.stride;
  manifest["source_height"] = store.tiles.source_height;
  manifest["source_width"] = store.tiles.source_width;
  manifest["bands"] = store.tiles.bands;
  manifest["dtype"] = dtype_name(store.dtype);
  manifest["nodata"] = store.nodata ? json(*store.nodata) : json(nullptr);
  if (store.split) {
    manifest["split_ratio"] = store.split->ratio;
    manifest["split_seed"] = store.split->seed;
  }
  json tiles = json::array();
  for (const auto& tile : store.tiles.tiles) {
    json t;
    t["id"] = tile.id;
    t["row"] = tile.origin_row;
    t["col"] = tile.origin_col;
    if (store.split) {
      const auto it = store.split->assignments.find(tile.id);
      require(it != store.split->assignments.end(), Errc::DimensionMismatch,
              "split manifest does not cover tile " + std::to_string(tile.id));
      t["split"] = it->second == Split::train ? "train" : "validation";
    } else {
      t["split"] = nullptr;
    }
    tiles.push_back(t);

    Raster img;
    img.header.width = tile.size;
    img.header.height = tile.size;
    img.header.bands = tile.bands;
    img.header.dtype = store.dtype;
    img.header.nodata = store.nodata;
    img.samples = tile.image;
    save_raster(img, dir / tile_image_name(tile.id));

    LabelMap lab;
    lab.width = tile.size;
    lab.height = tile.size;
    lab.labels = tile.labels;
    lab.palette = store.palette;
    save_label_map(lab, dir / tile_label_name(tile.id));
  }
  manifest["tiles"] = tiles;

  std::ofstream out(dir / "manifest.json");
  require(out.good(), Errc::IoFailure, "cannot write tile manifest");
  out << manifest.dump(2) << "\n";
  require(out.good(), Errc::IoFailure, "failed writing tile manifest");
}

TileStore load_tile_store(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  require(in.good(), Errc::MissingHeader,
          "tile store manifest not found in " + dir.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    fail(Errc::ConfigParse, std::string("manifest unparseable: ") + e.what());
  }

  TileStore store;
  store.tiles.tile_size = manifest.at("tile_size").get<int>();
  store.tiles.stride = manifest.at("stride").get<int>();
  store.tiles.source_height = manifest.at("source_height").get<int>();
  store.tiles.source_width = manifest.at("source_width").get<int>();
  store.tiles.bands = manifest.at("bands").get<int>();
  store.dtype = dtype_from_name(manifest.at("dtype").get<std::string>());
  if (!manifest.at("nodata").is_null())
    store.nodata = manifest.at("nodata").get<uint32_t>();

  bool any_split = false;
  SplitManifest split;
  if (manifest.contains("split_ratio")) {
    split.ratio = manifest.at("split_ratio").get<double>();
    split.seed = manifest.at("split_seed").get<uint64_t>();
  }

  for (const auto& t : manifest.at("tiles")) {
    const int id = t.at("id").get<int>();
    Tile tile;
    tile.id = id;
    tile.origin_row = t.at("row").get<int>();
    tile.origin_col = t.at("col").get<int>();
    tile.size = store.tiles.tile_size;
    tile.bands = store.tiles.bands;

    const Raster img = load_raster(dir / tile_image_name(id));
    require(img.header.width == tile.size && img.header.height == tile.size &&
                img.header.bands == store.tiles.bands,
            Errc::DimensionMismatch,
            "stored tile dims disagree with manifest");
    tile.image = img.samples;

    const LabelMap lab = load_label_map(dir / tile_label_name(id));
    require(lab.width == tile.size && lab.height == tile.size,
            Errc::DimensionMismatch, "stored label dims disagree");
    tile.labels = lab.labels;
    store.palette = lab.palette;

    if (!t.at("split").is_null()) {
      any_split = true;
      split.assignments[id] = t.at("split").get<std::string>() == "train"
                                  ? Split::train
                                  : Split::validation;
    }
    store.tiles.tiles.push_back(std::move(tile));
  }
  if (any_split) store.split = split;
  return store;
}

void update_store_split(const std::filesystem::path& dir,
                        const SplitManifest& manifest) {
  std::ifstream in(dir / "manifest.json");
  require(in.good(), Errc::MissingHeader,
          "tile store manifest not found in " + dir.string());
  json m;
  in >> m;
  in.close();
  m["split_ratio"] = manifest.ratio;
  m["split_seed"] = manifest.seed;
  for (auto& t : m.at("tiles")) {
    const int id = t.at("id").get<int>();
    const auto it = manifest.assignments.find(id);
    require(it != manifest.assignments.end(), Errc::DimensionMismatch,
            "split does not cover tile " + std::to_string(id));
    t["split"] = it->second == Split::train ? "train" : "validation";
  }
  std::ofstream out(dir / "manifest.json");
  require(out.good(), Errc::IoFailure, "cannot rewrite tile manifest");
  out << m.dump(2) << "\n";
}

}  // namespace lulcseg
