#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include "lulcseg/raster.hpp"

namespace lulcseg {

// A square image+label patch cut from a mosaic. Image samples are band-major
// within the tile; labels are row-major class IDs.
struct Tile {
  int id = 0;
  int origin_row = 0;
  int origin_col = 0;
  int size = 0;
  int bands = 0;
  std::vector<uint16_t> image;
  std::vector<uint8_t> labels;

  size_t image_index(int band, int row, int col) const {
    return (static_cast<size_t>(band) * size + row) * size + col;
  }
  size_t label_index(int row, int col) const {
    return static_cast<size_t>(row) * size + col;
  }
  int dominant_class() const;  // modal label, ties toward the lowest ID
};

struct TileSet {
  std::vector<Tile> tiles;
  int tile_size = 0;
  int stride = 0;
  int source_height = 0;
  int source_width = 0;
  int bands = 0;
};

enum class Split { train, validation };

struct SplitManifest {
  std::map<int, Split> assignments;  // tile_id -> split
  double ratio = 0.9;                // training fraction
  uint64_t seed = 0;

  size_t count(Split s) const;
};

// Geometric training-time transform: quarter-turn rotation, flips, optional
// zoom crop. The same transform is applied to image and labels; labels are
// resampled nearest-neighbor.
struct TransformSpec {
  int rotation_quarters = 0;  // clockwise 90-degree turns, 0..3
  bool hflip = false;
  bool vflip = false;
  std::optional<double> zoom;  // crop fraction in [0.7, 1.0)

  bool is_identity() const {
    return rotation_quarters == 0 && !hflip && !vflip && !zoom;
  }
};

// Closed-form tile count for an HxW mosaic, tile size T, stride s.
uint64_t tile_count(int height, int width, int tile_size, int stride);

// Regular tiling at stride = tile_size, shifted tiling at stride =
// tile_size/2. Trailing margins that do not fit a whole tile are dropped.
// `min_valid_fraction` > 0 additionally drops tiles whose share of valid
// (non-nodata) image pixels falls below the threshold; the closed-form count
// applies to the unfiltered grid.
TileSet tile_mosaic(const Raster& raster, const LabelMap& labels,
                    int tile_size, int stride,
                    double min_valid_fraction = 0.0);

// Stratified by each tile's dominant class; deterministic for a fixed seed.
// Per stratum the validation share is within one tile of (1 - ratio), and a
// stratum never sends its only tile to validation.
SplitManifest stratified_split(const TileSet& tileset, double ratio,
                               uint64_t seed);

Tile apply_transform(const Tile& tile, const TransformSpec& spec,
                     uint64_t seed);

// Draw a random spec: uniform rotation, independent coin-flip mirrors, and
// with probability 1/2 a zoom crop with fraction uniform in [0.7, 1.0).
TransformSpec random_transform_spec(uint64_t seed);

struct StitchResult {
  LabelMap map;
  uint64_t uncovered_pixels = 0;  // left as class 0 (coverage-gap warning)
};

// Reassemble predicted label tiles into a full map. Disjoint tilings place
// labels directly; overlapping tilings accumulate per-class votes and each
// pixel takes the class with the highest count (ties toward the lowest ID).
StitchResult stitch(const std::vector<Tile>& tiles, int tile_size,
                    int source_height, int source_width,
                    const ClassPalette& palette);

// On-disk tile store: manifest.json plus one bsq pair per tile.
struct TileStore {
  TileSet tiles;
  std::optional<SplitManifest> split;
  ClassPalette palette;
  Dtype dtype = Dtype::u8;
  std::optional<uint32_t> nodata;
};

void save_tile_store(const TileStore& store,
                     const std::filesystem::path& dir);
TileStore load_tile_store(const std::filesystem::path& dir);

// Rewrite just the split assignments of an existing store.
void update_store_split(const std::filesystem::path& dir,
                        const SplitManifest& manifest);

}  // namespace lulcseg
