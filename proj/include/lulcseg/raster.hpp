#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lulcseg/error.hpp"

namespace lulcseg {

// Band-sequential raster container. On-disk format is a `.bsq` payload
// (band-major samples, little-endian) next to a `.bsq.json` sidecar header.

enum class Dtype { u8, u16 };

inline uint32_t dtype_max(Dtype dt) { return dt == Dtype::u8 ? 255u : 65535u; }
inline int dtype_bytes(Dtype dt) { return dt == Dtype::u8 ? 1 : 2; }
inline int dtype_bits(Dtype dt) { return dt == Dtype::u8 ? 8 : 16; }
std::string dtype_name(Dtype dt);
Dtype dtype_from_name(const std::string& name);

struct PaletteEntry {
  int id = 0;
  std::string name;
  std::array<uint8_t, 3> color{0, 0, 0};
};

// Ordered class list. Class 0 is always "No data".
struct ClassPalette {
  std::vector<PaletteEntry> entries;

  int size() const { return static_cast<int>(entries.size()); }
  void validate() const;

  // The 17-entry palette used by the full pipeline: No data, the 15 land
  // classes present in the source mosaics, and Cloud (id 16).
  static ClassPalette nalcms17();
  // Small palette for synthetic demo scenes; `classes` includes class 0.
  static ClassPalette synthetic(int classes);
};

inline constexpr int kCloudClassId = 16;

struct RasterHeader {
  int width = 0;
  int height = 0;
  int bands = 0;
  Dtype dtype = Dtype::u8;
  std::optional<uint32_t> nodata;
  std::vector<std::string> band_names;

  void validate() const;
  size_t sample_count() const {
    return static_cast<size_t>(width) * height * bands;
  }
};

// Samples are stored band-major (band, row, col), widened to uint16_t in
// memory regardless of the file dtype.
struct Raster {
  RasterHeader header;
  std::vector<uint16_t> samples;

  size_t index(int band, int row, int col) const {
    return (static_cast<size_t>(band) * header.height + row) * header.width +
           col;
  }
  uint16_t at(int band, int row, int col) const {
    return samples[index(band, row, col)];
  }
  uint16_t& at(int band, int row, int col) {
    return samples[index(band, row, col)];
  }
  void validate() const;
};

struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> labels;  // row-major class IDs
  ClassPalette palette;

  size_t index(int row, int col) const {
    return static_cast<size_t>(row) * width + col;
  }
  uint8_t at(int row, int col) const { return labels[index(row, col)]; }
  uint8_t& at(int row, int col) { return labels[index(row, col)]; }
  void validate() const;
};

Raster load_raster(const std::filesystem::path& path);
void save_raster(const Raster& raster, const std::filesystem::path& path);

// Label maps reuse the raster format: bands=1, u8, plus a palette in the
// sidecar. Nodata defaults to 0 (the "No data" class).
LabelMap load_label_map(const std::filesystem::path& path);
void save_label_map(const LabelMap& map, const std::filesystem::path& path);

std::vector<uint16_t> extract_band(const Raster& raster, int band_index);

}  // namespace lulcseg
