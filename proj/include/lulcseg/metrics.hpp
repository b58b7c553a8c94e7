#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lulcseg/raster.hpp"

namespace lulcseg {

// C x C count table; entry (i, j) counts pixels with ground truth i that
// were predicted j.
struct ConfusionMatrix {
  int classes = 0;
  std::vector<uint64_t> counts;  // row-major, truth x predicted

  explicit ConfusionMatrix(int c = 0)
      : classes(c), counts(static_cast<size_t>(c) * c, 0) {}

  uint64_t& at(int truth, int pred) {
    return counts[static_cast<size_t>(truth) * classes + pred];
  }
  uint64_t at(int truth, int pred) const {
    return counts[static_cast<size_t>(truth) * classes + pred];
  }
  uint64_t row_sum(int truth) const;  // t_i
  uint64_t col_sum(int pred) const;
  uint64_t total() const;
  uint64_t diagonal() const;
  void merge(const ConfusionMatrix& other);
};

// Undefined metrics (zero denominators) stay unset and are excluded from
// averages.
struct ClassMetrics {
  uint64_t tp = 0;
  uint64_t fp = 0;
  uint64_t fn = 0;
  uint64_t support = 0;  // t_i = tp + fn
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::optional<double> csi;
};

struct MetricAverages {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  std::optional<double> csi;
};

struct MetricsReport {
  int classes = 0;
  uint64_t total_pixels = 0;
  double oa = 0.0;
  std::vector<ClassMetrics> per_class;
  std::vector<double> weights;  // w_i: pixel proportion over supported classes
  MetricAverages average;
  MetricAverages weighted_average;
  std::string protocol = "pooled";  // or "per_tile"
};

ConfusionMatrix confusion(const LabelMap& pred, const LabelMap& truth,
                          int classes);
double overall_accuracy(const ConfusionMatrix& cm);
std::vector<ClassMetrics> per_class(const ConfusionMatrix& cm);
MetricsReport report_from_confusion(const ConfusionMatrix& cm);

// Per-tile protocol: global per-class values are weighted averages of the
// per-tile values, each class weighted by the tile's share of that metric's
// denominator (truth pixels for recall, predicted pixels for precision, and
// so on). With those weights the aggregate coincides with the pooled-matrix
// computation wherever both are defined. `tile_weights` are the tiles'
// pixel proportions and must sum to 1.
MetricsReport aggregate(const std::vector<MetricsReport>& reports,
                        const std::vector<double>& tile_weights);

// Table-style emission. Percentages are rendered at two decimals; internal
// values keep full precision.
void write_confusion_csv(const ConfusionMatrix& cm,
                         const std::filesystem::path& path);
void write_per_class_csv(const MetricsReport& report,
                         const ClassPalette& palette,
                         const std::filesystem::path& path);
std::string summary_json(const MetricsReport& report);
void write_summary_json(const MetricsReport& report,
                        const std::filesystem::path& path);

struct ClassFrequency {
  int class_id = 0;
  uint64_t pixels = 0;
  double percentage = 0.0;
};
std::vector<ClassFrequency> class_frequencies(const LabelMap& map);
void write_frequency_csv(const std::vector<ClassFrequency>& freq,
                         const ClassPalette& palette,
                         const std::filesystem::path& path);

}  // namespace lulcseg
