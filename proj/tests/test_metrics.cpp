#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "lulcseg/metrics.hpp"

using namespace lulcseg;

namespace {

LabelMap random_map(std::mt19937_64& rng, int h, int w, int classes,
                    int palette_classes) {
  LabelMap m;
  m.width = w;
  m.height = h;
  m.palette = ClassPalette::synthetic(palette_classes);
  m.labels.resize(static_cast<size_t>(h) * w);
  for (auto& l : m.labels) l = static_cast<uint8_t>(rng() % classes);
  return m;
}

// Row of the published Landsat 8 per-class table: csi, precision, recall,
// f1, all in percent.
struct TableRow {
  const char* name;
  double csi, precision, recall, f1;
};

// 17-class per-class assessment, Landsat 8 column block.
constexpr TableRow kLandsat8Rows[] = {
    {"No data", 99.99, 99.99, 99.99, 99.99},
    {"Temperate or sub-polar needleleaf forest", 76.21, 84.65, 88.44, 86.5},
    {"Sub-polar taiga needleleaf forest", 41.62, 67.21, 52.22, 58.77},
    {"Temperate or sub-polar broadleaf forest", 71.37, 83.11, 83.48, 83.29},
    {"Mixed forest", 56.03, 74.1, 69.67, 71.82},
    {"Temperate or sub-polar shrubland", 48.61, 70.48, 61.04, 65.42},
    {"Temperate or sub-polar grassland", 81.44, 90.12, 89.43, 89.77},
    {"Sub-polar or polar shrubland-lichen-moss", 17.62, 54.06, 20.73, 29.97},
    {"Sub-polar or polar grassland-lichen-moss", 21.25, 59.3, 24.87, 35.04},
    {"Sub-polar or polar barren-lichen-moss", 37.27, 66.13, 46.07, 54.31},
    {"Wetland", 75.76, 85.78, 86.64, 86.21},
    {"Cropland", 93.12, 95.77, 97.11, 96.44},
    {"Barren land", 70.79, 84.13, 81.7, 82.9},
    {"Urban and built-up", 57.79, 74.52, 72.01, 73.24},
    {"Water", 88.25, 95.04, 92.51, 93.76},
    {"Snow and ice", 69.57, 86.6, 77.96, 82.05},
    {"Cloud", 91.51, 94.81, 96.33, 95.56},
};

}  // namespace

TEST_CASE("perfect prediction yields a diagonal matrix and OA 1") {
  std::mt19937_64 rng(3);
  const LabelMap truth = random_map(rng, 8, 8, 5, 5);
  const ConfusionMatrix cm = confusion(truth, truth, 5);
  CHECK(overall_accuracy(cm) == 1.0);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      if (i != j) CHECK(cm.at(i, j) == 0);
}

TEST_CASE("hand-counted 2x2 confusion") {
  LabelMap truth, pred;
  truth.width = pred.width = 2;
  truth.height = pred.height = 2;
  truth.palette = pred.palette = ClassPalette::synthetic(2);
  truth.labels = {0, 0, 1, 1};
  pred.labels = {0, 1, 1, 1};
  const ConfusionMatrix cm = confusion(pred, truth, 2);
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(0, 1) == 1);
  CHECK(cm.at(1, 1) == 2);
  CHECK(cm.at(1, 0) == 0);
  CHECK(cm.total() == 4);
}

TEST_CASE("OA of a hand matrix: 80/100") {
  ConfusionMatrix cm(2);
  cm.at(0, 0) = 50;
  cm.at(1, 1) = 30;
  cm.at(0, 1) = 10;
  cm.at(1, 0) = 10;
  CHECK(overall_accuracy(cm) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("empty matrix raises EmptyMatrix") {
  ConfusionMatrix cm(3);
  CHECK_THROWS_AS(overall_accuracy(cm), Error);
}

TEST_CASE("mismatched dims and out-of-range labels are rejected") {
  std::mt19937_64 rng(5);
  LabelMap a = random_map(rng, 4, 4, 3, 3);
  LabelMap b = random_map(rng, 4, 5, 3, 3);
  CHECK_THROWS_AS(confusion(a, b, 3), Error);
  LabelMap c = random_map(rng, 4, 4, 3, 3);
  CHECK_THROWS_AS(confusion(a, c, 2), Error);  // labels reach class 2
}

TEST_CASE("published per-class rows: F1 and CSI recomputed from P and R") {
  // F1 = 2PR/(P+R) lands within half an ULP of the printed two-decimal
  // values on every row. CSI via 1/CSI = 1/P + 1/R - 1 inherits the rounding
  // of both inputs, so its worst case is |dP| + |dR| + print ~= 0.0125.
  double max_f1_err = 0.0;
  double max_csi_err = 0.0;
  for (const auto& row : kLandsat8Rows) {
    const double p = row.precision / 100.0;
    const double r = row.recall / 100.0;
    const double f1 = 100.0 * 2.0 * p * r / (p + r);
    const double csi = 100.0 / (1.0 / p + 1.0 / r - 1.0);
    max_f1_err = std::max(max_f1_err, std::abs(f1 - row.f1));
    max_csi_err = std::max(max_csi_err, std::abs(csi - row.csi));
  }
  CHECK(max_f1_err <= 0.005);
  CHECK(max_csi_err <= 0.0125);

  // The two rows the identities are anchored on hold at two-decimal
  // precision.
  const auto& cropland = kLandsat8Rows[11];
  const double pf = cropland.precision / 100.0;
  const double rf = cropland.recall / 100.0;
  CHECK(std::abs(100.0 * 2.0 * pf * rf / (pf + rf) - 96.44) <= 0.005);
  const auto& water = kLandsat8Rows[14];
  const double pw = water.precision / 100.0;
  const double rw = water.recall / 100.0;
  CHECK(std::abs(100.0 / (1.0 / pw + 1.0 / rw - 1.0) - 88.25) <= 0.005);
}

TEST_CASE("per_class against a naive per-pixel counting oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int C = 2 + static_cast<int>(rng() % 6);
    const LabelMap truth = random_map(rng, 16, 16, C, C);
    const LabelMap pred = random_map(rng, 16, 16, C, C);
    const ConfusionMatrix cm = confusion(pred, truth, C);
    const auto metrics = per_class(cm);

    for (int cls = 0; cls < C; ++cls) {
      uint64_t tp = 0, fp = 0, fn = 0;
      for (size_t px = 0; px < truth.labels.size(); ++px) {
        const bool truth_is = truth.labels[px] == cls;
        const bool pred_is = pred.labels[px] == cls;
        tp += truth_is && pred_is;
        fp += !truth_is && pred_is;
        fn += truth_is && !pred_is;
      }
      REQUIRE(metrics[cls].tp == tp);
      REQUIRE(metrics[cls].fp == fp);
      REQUIRE(metrics[cls].fn == fn);
      if (tp + fp > 0) {
        REQUIRE(*metrics[cls].precision ==
                static_cast<double>(tp) / (tp + fp));
      } else {
        REQUIRE(!metrics[cls].precision);
      }
      if (tp + fp + fn > 0) {
        REQUIRE(*metrics[cls].csi ==
                static_cast<double>(tp) / (tp + fp + fn));
      }
    }
  }
}

TEST_CASE("class absent from truth and prediction is undefined everywhere") {
  ConfusionMatrix cm(3);
  cm.at(0, 0) = 5;
  cm.at(1, 1) = 5;
  cm.at(0, 1) = 1;
  const auto metrics = per_class(cm);
  CHECK(!metrics[2].precision);
  CHECK(!metrics[2].recall);
  CHECK(!metrics[2].f1);
  CHECK(!metrics[2].csi);
  // And it stays out of the simple average.
  const MetricsReport report = report_from_confusion(cm);
  const double expected =
      (*metrics[0].precision + *metrics[1].precision) / 2.0;
  CHECK(*report.average.precision == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("F1 is the harmonic mean and the CSI identity holds exactly") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const int C = 2 + static_cast<int>(rng() % 8);
    const LabelMap truth = random_map(rng, 8, 8, C, C);
    const LabelMap pred = random_map(rng, 8, 8, C, C);
    const auto metrics = per_class(confusion(pred, truth, C));
    for (const auto& m : metrics) {
      if (m.f1) {
        const double harmonic =
            2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
        REQUIRE(*m.f1 == harmonic);
      }
      if (m.csi && m.tp > 0) {
        const double inv =
            1.0 / *m.precision + 1.0 / *m.recall - 1.0;
        REQUIRE(*m.csi == doctest::Approx(1.0 / inv).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("OA equals the support-weighted average of recall") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const int C = 2 + static_cast<int>(rng() % 8);
    const LabelMap truth = random_map(rng, 12, 12, C, C);
    const LabelMap pred = random_map(rng, 12, 12, C, C);
    const MetricsReport report =
        report_from_confusion(confusion(pred, truth, C));
    REQUIRE(*report.weighted_average.recall ==
            doctest::Approx(report.oa).epsilon(1e-12));
  }
}

TEST_CASE("all-wrong two-class prediction has OA 0") {
  LabelMap truth, pred;
  truth.width = pred.width = 2;
  truth.height = pred.height = 1;
  truth.palette = pred.palette = ClassPalette::synthetic(2);
  truth.labels = {0, 1};
  pred.labels = {1, 0};
  CHECK(overall_accuracy(confusion(pred, truth, 2)) == 0.0);
}

TEST_CASE("permuting class order permutes the report") {
  ConfusionMatrix cm(3);
  cm.at(0, 0) = 7;
  cm.at(1, 1) = 3;
  cm.at(2, 2) = 2;
  cm.at(0, 1) = 4;
  cm.at(2, 1) = 1;
  const auto metrics = per_class(cm);

  // Swap classes 0 and 2 everywhere.
  ConfusionMatrix swapped(3);
  const auto map = [](int c) { return c == 0 ? 2 : (c == 2 ? 0 : 1); };
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) swapped.at(map(i), map(j)) = cm.at(i, j);
  const auto swapped_metrics = per_class(swapped);
  for (int c = 0; c < 3; ++c) {
    CHECK(swapped_metrics[map(c)].precision == metrics[c].precision);
    CHECK(swapped_metrics[map(c)].recall == metrics[c].recall);
    CHECK(swapped_metrics[map(c)].csi == metrics[c].csi);
  }
}

TEST_CASE("single-tile aggregate equals that tile's report") {
  std::mt19937_64 rng(31);
  const LabelMap truth = random_map(rng, 8, 8, 4, 4);
  const LabelMap pred = random_map(rng, 8, 8, 4, 4);
  const MetricsReport tile = report_from_confusion(confusion(pred, truth, 4));
  const MetricsReport agg = aggregate({tile}, {1.0});
  CHECK(agg.oa == doctest::Approx(tile.oa).epsilon(1e-12));
  for (int c = 0; c < 4; ++c) {
    if (tile.per_class[c].precision) {
      CHECK(*agg.per_class[c].precision ==
            doctest::Approx(*tile.per_class[c].precision).epsilon(1e-12));
    }
  }
}

TEST_CASE("Eq. 3b weighted average arithmetic") {
  // Two classes, w = [0.75, 0.25], M = [0.8, 0.4] -> 0.7.
  ConfusionMatrix cm(2);
  // Class 0: support 75, recall 0.8; class 1: support 25, recall 0.4.
  cm.at(0, 0) = 60;
  cm.at(0, 1) = 15;
  cm.at(1, 1) = 10;
  cm.at(1, 0) = 15;
  const MetricsReport report = report_from_confusion(cm);
  CHECK(report.weights[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(*report.per_class[0].recall == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(*report.per_class[1].recall == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(*report.weighted_average.recall ==
        doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("per-tile aggregate equals the pooled matrix when classes span tiles") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const int C = 3;
    const int tiles = 4;
    std::vector<MetricsReport> reports;
    std::vector<double> weights;
    ConfusionMatrix pooled(C);
    uint64_t total = 0;
    std::vector<ConfusionMatrix> mats;
    for (int t = 0; t < tiles; ++t) {
      // Guarantee every class appears in every tile's truth by stamping one
      // pixel per class.
      LabelMap truth = random_map(rng, 8, 8, C, C);
      LabelMap pred = random_map(rng, 8, 8, C, C);
      for (int c = 0; c < C; ++c) truth.labels[c] = static_cast<uint8_t>(c);
      const ConfusionMatrix cm = confusion(pred, truth, C);
      pooled.merge(cm);
      mats.push_back(cm);
      reports.push_back(report_from_confusion(cm));
      total += cm.total();
    }
    for (const auto& cm : mats)
      weights.push_back(static_cast<double>(cm.total()) / total);

    const MetricsReport agg = aggregate(reports, weights);
    const MetricsReport pooled_report = report_from_confusion(pooled);
    REQUIRE(agg.oa == doctest::Approx(pooled_report.oa).epsilon(1e-9));
    for (int c = 0; c < C; ++c) {
      if (pooled_report.per_class[c].recall) {
        REQUIRE(*agg.per_class[c].recall ==
                doctest::Approx(*pooled_report.per_class[c].recall)
                    .epsilon(1e-9));
      }
      if (pooled_report.per_class[c].precision && agg.per_class[c].precision) {
        REQUIRE(*agg.per_class[c].precision ==
                doctest::Approx(*pooled_report.per_class[c].precision)
                    .epsilon(1e-9));
      }
      if (pooled_report.per_class[c].f1 && agg.per_class[c].f1) {
        REQUIRE(*agg.per_class[c].f1 ==
                doctest::Approx(*pooled_report.per_class[c].f1).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("aggregate validates its inputs") {
  CHECK_THROWS_AS(aggregate({}, {}), Error);
  std::mt19937_64 rng(51);
  const LabelMap truth = random_map(rng, 4, 4, 2, 2);
  const MetricsReport r = report_from_confusion(confusion(truth, truth, 2));
  CHECK_THROWS_AS(aggregate({r, r}, {0.9, 0.2}), Error);  // weights != 1
}

TEST_CASE("class frequencies cover the map") {
  std::mt19937_64 rng(61);
  const LabelMap map = random_map(rng, 10, 10, 4, 4);
  const auto freq = class_frequencies(map);
  uint64_t pixels = 0;
  double pct = 0.0;
  for (const auto& f : freq) {
    pixels += f.pixels;
    pct += f.percentage;
  }
  CHECK(pixels == 100);
  CHECK(pct == doctest::Approx(100.0).epsilon(1e-9));
}
