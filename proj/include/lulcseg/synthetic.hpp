#pragma once

#include <cstdint>

#include "lulcseg/raster.hpp"

namespace lulcseg {

struct SyntheticScene {
  Raster raster;
  LabelMap labels;
};

// Voronoi-cell land cover: seeded centers carry classes 1..classes-1, every
// pixel takes the nearest center's class, and each (class, band) pair gets a
// distinct mean plus uniform noise. With nodata_margin a corner is blanked
// to class 0 / nodata samples.
SyntheticScene make_blob_scene(int height, int width, int bands, int classes,
                               uint64_t seed, Dtype dtype = Dtype::u8,
                               bool nodata_margin = false);

// Thin polylines (width 1) and small disks on a uniform background; the
// structures are at the pixel scale where aggressive downsampling hurts.
// Classes: 0 nodata (unused), 1 background, 2 lines, 3 disks.
SyntheticScene make_fine_structure_scene(int height, int width, int bands,
                                         uint64_t seed);

// Stamp bright elliptical patches across all bands (synthetic clouds for
// the thresholding path). Returns the number of pixels touched.
uint64_t add_cloud_patches(Raster& raster, uint64_t seed, int count);

}  // namespace lulcseg
