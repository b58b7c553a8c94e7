#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "lulcseg/raster.hpp"

namespace lulcseg {

// Per-value sample histogram (256 bins for u8, 65536 for u16). Nodata
// samples are excluded at construction.
struct Histogram {
  std::vector<uint64_t> bins;
  uint64_t total = 0;

  static Histogram from_plane(std::span<const uint16_t> plane, Dtype dtype,
                              std::optional<uint32_t> nodata);
  int populated_bins() const;
};

// Bit layout of a quality-assessment band. Defaults follow the Landsat 8
// Collection-1 BQA convention; everything is configurable because other
// products lay the bits out differently.
struct QaBitSpec {
  int cloud_bit = 4;
  std::optional<std::pair<int, int>> confidence_bits = {{5, 6}};
  int confidence_min = 3;

  void validate(int sample_bits) const;
};

struct CloudMask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> flags;  // 1 = cloud

  uint64_t cloud_pixels() const;
};

// Threshold that maximizes the between-class variance
// sigma_b^2(t) = w0(t) * w1(t) * (mu0(t) - mu1(t))^2, ties resolved toward
// the lowest t. Samples <= t fall in class 0.
uint32_t otsu_threshold(const Histogram& hist);

CloudMask cloud_mask_otsu(const Raster& raster, int blue_band);

CloudMask cloud_mask_qa(std::span<const uint16_t> qa_plane, int width,
                        int height, const QaBitSpec& spec, int sample_bits);

// Render a mask as a label raster with classes {0: clear, 16: cloud}.
LabelMap mask_to_labels(const CloudMask& mask);

// Overwrite labels with the cloud class wherever the mask is set.
void merge_cloud_labels(LabelMap& labels, const CloudMask& mask,
                        int cloud_class);

}  // namespace lulcseg
