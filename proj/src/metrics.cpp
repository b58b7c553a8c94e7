#include "lulcseg/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace lulcseg {

using json = nlohmann::ordered_json;

uint64_t ConfusionMatrix::row_sum(int truth) const {
  uint64_t s = 0;
  for (int j = 0; j < classes; ++j) s += at(truth, j);
  return s;
}

uint64_t ConfusionMatrix::col_sum(int pred) const {
  uint64_t s = 0;
  for (int i = 0; i < classes; ++i) s += at(i, pred);
  return s;
}

uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), uint64_t{0});
}

uint64_t ConfusionMatrix::diagonal() const {
  uint64_t s = 0;
  for (int i = 0; i < classes; ++i) s += at(i, i);
  return s;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  require(other.classes == classes, Errc::DimensionMismatch,
          "cannot merge confusion matrices of different class counts");
  for (size_t k = 0; k < counts.size(); ++k) counts[k] += other.counts[k];
}

ConfusionMatrix confusion(const LabelMap& pred, const LabelMap& truth,
                          int classes) {
  require(pred.width == truth.width && pred.height == truth.height,
          Errc::DimensionMismatch, "prediction and truth dims differ");
  ConfusionMatrix cm(classes);
  const size_t n = pred.labels.size();
  for (size_t k = 0; k < n; ++k) {
    const int t = truth.labels[k];
    const int p = pred.labels[k];
    require(t < classes && p < classes, Errc::LabelOutOfRange,
            "label >= class count " + std::to_string(classes));
    ++cm.at(t, p);
  }
  return cm;
}

double overall_accuracy(const ConfusionMatrix& cm) {
  const uint64_t total = cm.total();
  require(total > 0, Errc::EmptyMatrix, "confusion matrix has no pixels");
  return static_cast<double>(cm.diagonal()) / static_cast<double>(total);
}

std::vector<ClassMetrics> per_class(const ConfusionMatrix& cm) {
  std::vector<ClassMetrics> out(cm.classes);
  for (int i = 0; i < cm.classes; ++i) {
    ClassMetrics& m = out[i];
    m.tp = cm.at(i, i);
    m.fn = cm.row_sum(i) - m.tp;
    m.fp = cm.col_sum(i) - m.tp;
    m.support = m.tp + m.fn;
    if (m.tp + m.fp > 0)
      m.precision = static_cast<double>(m.tp) / (m.tp + m.fp);
    if (m.tp + m.fn > 0) m.recall = static_cast<double>(m.tp) / (m.tp + m.fn);
    if (m.precision && m.recall && *m.precision + *m.recall > 0.0) {
      m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
    }
    if (m.tp + m.fp + m.fn > 0)
      m.csi = static_cast<double>(m.tp) / (m.tp + m.fp + m.fn);
  }
  return out;
}

namespace {

struct Accumulator {
  double weighted_num = 0.0;
  double weight_sum = 0.0;
  double simple_sum = 0.0;
  int defined = 0;

  void add(const std::optional<double>& value, double weight) {
    if (!value) return;
    simple_sum += *value;
    ++defined;
    weighted_num += weight * *value;
    weight_sum += weight;
  }
  std::optional<double> simple() const {
    if (defined == 0) return std::nullopt;
    return simple_sum / defined;
  }
  std::optional<double> weighted() const {
    if (weight_sum <= 0.0) return std::nullopt;
    return weighted_num / weight_sum;
  }
};

// Eq. (3a)/(3b) over the classes where a metric is defined; weighted
// averages renormalize the pixel-proportion weights over those classes.
void fill_averages(MetricsReport& report) {
  Accumulator precision, recall, f1, csi;
  for (int i = 0; i < report.classes; ++i) {
    const ClassMetrics& m = report.per_class[i];
    const double w = report.weights[i];
    precision.add(m.precision, w);
    recall.add(m.recall, w);
    f1.add(m.f1, w);
    csi.add(m.csi, w);
  }
  report.average = {precision.simple(), recall.simple(), f1.simple(),
                    csi.simple()};
  report.weighted_average = {precision.weighted(), recall.weighted(),
                             f1.weighted(), csi.weighted()};
}

}  // namespace

MetricsReport report_from_confusion(const ConfusionMatrix& cm) {
  MetricsReport report;
  report.classes = cm.classes;
  report.total_pixels = cm.total();
  report.oa = overall_accuracy(cm);
  report.per_class = per_class(cm);
  report.weights.resize(cm.classes, 0.0);
  for (int i = 0; i < cm.classes; ++i) {
    report.weights[i] = static_cast<double>(report.per_class[i].support) /
                        static_cast<double>(report.total_pixels);
  }
  report.protocol = "pooled";
  fill_averages(report);
  return report;
}

MetricsReport aggregate(const std::vector<MetricsReport>& reports,
                        const std::vector<double>& tile_weights) {
  require(!reports.empty(), Errc::EmptyReportList, "no per-tile reports");
  require(reports.size() == tile_weights.size(), Errc::DimensionMismatch,
          "tile weight count != report count");
  const double wsum =
      std::accumulate(tile_weights.begin(), tile_weights.end(), 0.0);
  require(std::abs(wsum - 1.0) <= 1e-9, Errc::WeightSumInvalid,
          "tile weights sum to " + std::to_string(wsum));
  const int classes = reports.front().classes;
  for (const auto& r : reports) {
    require(r.classes == classes, Errc::DimensionMismatch,
            "per-tile reports disagree on class count");
  }

  MetricsReport out;
  out.classes = classes;
  out.protocol = "per_tile";
  out.per_class.assign(classes, ClassMetrics{});
  out.weights.assign(classes, 0.0);

  // OA: tiles weighted by their pixel proportion.
  double oa = 0.0;
  for (size_t t = 0; t < reports.size(); ++t) {
    oa += tile_weights[t] * reports[t].oa;
    out.total_pixels += reports[t].total_pixels;
  }
  out.oa = oa;

  // Per-class: weighted average of per-tile values; each tile weighted by
  // its share of the metric's denominator so the result matches the pooled
  // computation wherever both are defined.
  for (int i = 0; i < classes; ++i) {
    Accumulator precision, recall, f1, csi;
    ClassMetrics& g = out.per_class[i];
    for (const auto& r : reports) {
      const ClassMetrics& m = r.per_class[i];
      g.tp += m.tp;
      g.fp += m.fp;
      g.fn += m.fn;
      g.support += m.support;
      precision.add(m.precision, static_cast<double>(m.tp + m.fp));
      recall.add(m.recall, static_cast<double>(m.tp + m.fn));
      f1.add(m.f1, static_cast<double>(2 * m.tp + m.fp + m.fn));
      csi.add(m.csi, static_cast<double>(m.tp + m.fp + m.fn));
    }
    g.precision = precision.weighted();
    g.recall = recall.weighted();
    g.f1 = f1.weighted();
    g.csi = csi.weighted();
  }
  for (int i = 0; i < classes; ++i) {
    out.weights[i] = static_cast<double>(out.per_class[i].support) /
                     static_cast<double>(out.total_pixels);
  }
  fill_averages(out);
  return out;
}

namespace {

std::string pct2(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", *v * 100.0);
  return buf;
}

json pct_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return std::round(*v * 10000.0) / 100.0;
}

}  // namespace

void write_confusion_csv(const ConfusionMatrix& cm,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  require(out.good(), Errc::IoFailure, "cannot write " + path.string());
  for (int i = 0; i < cm.classes; ++i) {
    for (int j = 0; j < cm.classes; ++j) {
      if (j) out << ',';
      out << cm.at(i, j);
    }
    out << '\n';
  }
  require(out.good(), Errc::IoFailure, "failed writing " + path.string());
}

void write_per_class_csv(const MetricsReport& report,
                         const ClassPalette& palette,
                         const std::filesystem::path& path) {
  require(palette.size() == report.classes, Errc::DimensionMismatch,
          "palette size != report classes");
  std::ofstream out(path);
  require(out.good(), Errc::IoFailure, "cannot write " + path.string());
  out << "class,csi,precision,recall,f1\n";
  for (int i = 0; i < report.classes; ++i) {
    const ClassMetrics& m = report.per_class[i];
    out << '"' << palette.entries[i].name << '"' << ',' << pct2(m.csi) << ','
        << pct2(m.precision) << ',' << pct2(m.recall) << ',' << pct2(m.f1)
        << '\n';
  }
  require(out.good(), Errc::IoFailure, "failed writing " + path.string());
}

std::string summary_json(const MetricsReport& report) {
  json j;
  j["protocol"] = report.protocol;
  j["total_pixels"] = report.total_pixels;
  j["oa"] = pct_json(report.oa);
  j["average"] = {{"csi", pct_json(report.average.csi)},
                  {"precision", pct_json(report.average.precision)},
                  {"recall", pct_json(report.average.recall)},
                  {"f1", pct_json(report.average.f1)}};
  j["weighted_average"] = {
      {"csi", pct_json(report.weighted_average.csi)},
      {"precision", pct_json(report.weighted_average.precision)},
      {"recall", pct_json(report.weighted_average.recall)},
      {"f1", pct_json(report.weighted_average.f1)}};
  return j.dump(2) + "\n";
}

void write_summary_json(const MetricsReport& report,
                        const std::filesystem::path& path) {
  std::ofstream out(path);
  require(out.good(), Errc::IoFailure, "cannot write " + path.string());
  out << summary_json(report);
  require(out.good(), Errc::IoFailure, "failed writing " + path.string());
}

std::vector<ClassFrequency> class_frequencies(const LabelMap& map) {
  std::vector<ClassFrequency> freq(map.palette.size());
  for (int i = 0; i < map.palette.size(); ++i) freq[i].class_id = i;
  for (uint8_t l : map.labels) ++freq[l].pixels;
  const double total = static_cast<double>(map.labels.size());
  for (auto& f : freq)
    f.percentage = 100.0 * static_cast<double>(f.pixels) / total;
  return freq;
}

void write_frequency_csv(const std::vector<ClassFrequency>& freq,
                         const ClassPalette& palette,
                         const std::filesystem::path& path) {
  require(palette.size() == static_cast<int>(freq.size()),
          Errc::DimensionMismatch, "palette size != frequency rows");
  std::ofstream out(path);
  require(out.good(), Errc::IoFailure, "cannot write " + path.string());
  out << "class,pixel_percentage,pixels\n";
  for (const auto& f : freq) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", f.percentage);
    out << '"' << palette.entries[f.class_id].name << '"' << ',' << buf << ','
        << f.pixels << '\n';
  }
  require(out.good(), Errc::IoFailure, "failed writing " + path.string());
}

}  // namespace lulcseg
