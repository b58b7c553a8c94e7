#include "lulcseg/cloudmask.hpp"

#include <algorithm>

namespace lulcseg {

Histogram Histogram::from_plane(std::span<const uint16_t> plane, Dtype dtype,
                                std::optional<uint32_t> nodata) {
  Histogram h;
  h.bins.assign(static_cast<size_t>(dtype_max(dtype)) + 1, 0);
  for (uint16_t v : plane) {
    if (nodata && v == *nodata) continue;
    ++h.bins[v];
    ++h.total;
  }
  return h;
}

int Histogram::populated_bins() const {
  int n = 0;
  for (uint64_t c : bins) n += (c > 0);
  return n;
}

void QaBitSpec::validate(int sample_bits) const {
  require(cloud_bit >= 0 && cloud_bit < sample_bits, Errc::BitOutOfRange,
          "cloud bit " + std::to_string(cloud_bit) + " outside " +
              std::to_string(sample_bits) + "-bit samples");
  if (confidence_bits) {
    const auto [lo, hi] = *confidence_bits;
    require(lo >= 0 && hi < sample_bits, Errc::BitOutOfRange,
            "confidence bits outside sample width");
    require(lo < hi, Errc::BitOutOfRange,
            "confidence bit range must satisfy low < high");
  }
}

uint64_t CloudMask::cloud_pixels() const {
  uint64_t n = 0;
  for (uint8_t f : flags) n += f;
  return n;
}

uint32_t otsu_threshold(const Histogram& hist) {
  require(hist.populated_bins() >= 2, Errc::DegenerateHistogram,
          "histogram needs >= 2 populated bins");
  const size_t levels = hist.bins.size();
  const double total = static_cast<double>(hist.total);

  double sum_all = 0.0;
  for (size_t v = 0; v < levels; ++v)
    sum_all += static_cast<double>(v) * static_cast<double>(hist.bins[v]);

  // Single ascending pass; the running argmax keeps the lowest t on ties.
  double w0 = 0.0;
  double sum0 = 0.0;
  double best = -1.0;
  uint32_t best_t = 0;
  for (size_t t = 0; t + 1 < levels; ++t) {
    w0 += static_cast<double>(hist.bins[t]);
    sum0 += static_cast<double>(t) * static_cast<double>(hist.bins[t]);
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double mu0 = sum0 / w0;
    const double mu1 = (sum_all - sum0) / w1;
    const double d = mu0 - mu1;
    const double sigma_b = (w0 / total) * (w1 / total) * d * d;
    if (sigma_b > best) {
      best = sigma_b;
      best_t = static_cast<uint32_t>(t);
    }
  }
  return best_t;
}

CloudMask cloud_mask_otsu(const Raster& raster, int blue_band) {
  const auto plane = extract_band(raster, blue_band);
  const auto hist = Histogram::from_plane(plane, raster.header.dtype,
                                          raster.header.nodata);
  const uint32_t t = otsu_threshold(hist);

  CloudMask mask;
  mask.width = raster.header.width;
  mask.height = raster.header.height;
  mask.flags.resize(plane.size());
  const auto nodata = raster.header.nodata;
  for (size_t i = 0; i < plane.size(); ++i) {
    const bool valid = !(nodata && plane[i] == *nodata);
    mask.flags[i] = valid && plane[i] > t;
  }
  return mask;
}

CloudMask cloud_mask_qa(std::span<const uint16_t> qa_plane, int width,
                        int height, const QaBitSpec& spec, int sample_bits) {
  spec.validate(sample_bits);
  require(qa_plane.size() == static_cast<size_t>(width) * height,
          Errc::DimensionMismatch, "qa plane size != width*height");
  CloudMask mask;
  mask.width = width;
  mask.height = height;
  mask.flags.resize(qa_plane.size());
  for (size_t i = 0; i < qa_plane.size(); ++i) {
    const uint16_t word = qa_plane[i];
    bool cloud = (word >> spec.cloud_bit) & 1u;
    if (cloud && spec.confidence_bits) {
      const auto [lo, hi] = *spec.confidence_bits;
      const uint32_t field_width = static_cast<uint32_t>(hi - lo + 1);
      const uint32_t confidence = (word >> lo) & ((1u << field_width) - 1u);
      cloud = confidence >= static_cast<uint32_t>(spec.confidence_min);
    }
    mask.flags[i] = cloud;
  }
  return mask;
}

LabelMap mask_to_labels(const CloudMask& mask) {
  LabelMap map;
  map.width = mask.width;
  map.height = mask.height;
  map.palette = ClassPalette::nalcms17();
  map.labels.resize(mask.flags.size());
  for (size_t i = 0; i < mask.flags.size(); ++i)
    map.labels[i] = mask.flags[i] ? kCloudClassId : 0;
  return map;
}

void merge_cloud_labels(LabelMap& labels, const CloudMask& mask,
                        int cloud_class) {
  require(labels.width == mask.width && labels.height == mask.height,
          Errc::DimensionMismatch, "mask dims != label dims");
  require(cloud_class < labels.palette.size(), Errc::LabelOutOfRange,
          "cloud class outside palette");
  for (size_t i = 0; i < labels.labels.size(); ++i) {
    if (mask.flags[i]) labels.labels[i] = static_cast<uint8_t>(cloud_class);
  }
}

}  // namespace lulcseg
