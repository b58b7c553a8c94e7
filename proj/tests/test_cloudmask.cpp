#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "lulcseg/cloudmask.hpp"

using namespace lulcseg;

namespace {

Histogram histogram_from_counts(const std::vector<std::pair<int, uint64_t>>&
                                    spikes,
                                int levels) {
  Histogram h;
  h.bins.assign(levels, 0);
  for (const auto& [value, count] : spikes) {
    h.bins[value] += count;
    h.total += count;
  }
  return h;
}

// Independent exhaustive argmax: prefix sums rebuilt per histogram, then
// every threshold evaluated from them.
uint32_t exhaustive_otsu(const Histogram& hist) {
  const size_t L = hist.bins.size();
  std::vector<double> cum_w(L), cum_s(L);
  double w = 0.0, s = 0.0;
  for (size_t v = 0; v < L; ++v) {
    w += static_cast<double>(hist.bins[v]);
    s += static_cast<double>(v) * static_cast<double>(hist.bins[v]);
    cum_w[v] = w;
    cum_s[v] = s;
  }
  const double total = cum_w[L - 1];
  const double sum_all = cum_s[L - 1];
  double best = -1.0;
  uint32_t best_t = 0;
  for (size_t t = 0; t + 1 < L; ++t) {
    const double w0 = cum_w[t];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double mu0 = cum_s[t] / w0;
    const double mu1 = (sum_all - cum_s[t]) / w1;
    const double d = mu0 - mu1;
    const double sigma_b = (w0 / total) * (w1 / total) * d * d;
    if (sigma_b > best) {
      best = sigma_b;
      best_t = static_cast<uint32_t>(t);
    }
  }
  return best_t;
}

Histogram random_histogram(std::mt19937_64& rng, int levels) {
  Histogram h;
  h.bins.assign(levels, 0);
  const int populated = 2 + static_cast<int>(rng() % (levels / 2));
  for (int i = 0; i < populated; ++i) {
    const int v = static_cast<int>(rng() % levels);
    const uint64_t count = 1 + rng() % 1000;
    h.bins[v] += count;
    h.total += count;
  }
  return h;
}

}  // namespace

TEST_CASE("two spikes tie-break to the lowest threshold") {
  const Histogram h = histogram_from_counts({{10, 50}, {200, 50}}, 256);
  CHECK(otsu_threshold(h) == 10);
}

TEST_CASE("single spike is degenerate") {
  const Histogram h = histogram_from_counts({{128, 100}}, 256);
  try {
    otsu_threshold(h);
    FAIL("expected DegenerateHistogram");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DegenerateHistogram);
  }
}

TEST_CASE("two-population thresholds satisfy a <= t < b") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const int a = static_cast<int>(rng() % 200);
    const int b = a + 1 + static_cast<int>(rng() % (255 - a - 1 + 1));
    const Histogram h = histogram_from_counts(
        {{a, 1 + rng() % 500}, {b, 1 + rng() % 500}}, 256);
    const uint32_t t = otsu_threshold(h);
    CHECK(t >= static_cast<uint32_t>(a));
    CHECK(t < static_cast<uint32_t>(b));
  }
}

TEST_CASE("otsu equals the exhaustive argmax on random 8-bit histograms") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 500; ++trial) {
    const Histogram h = random_histogram(rng, 256);
    REQUIRE(otsu_threshold(h) == exhaustive_otsu(h));
  }
}

TEST_CASE("otsu equals the exhaustive argmax on random 16-bit histograms") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const Histogram h = random_histogram(rng, 65536);
    REQUIRE(otsu_threshold(h) == exhaustive_otsu(h));
  }
}

TEST_CASE("otsu is invariant under uniform count scaling") {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 50; ++trial) {
    Histogram h = random_histogram(rng, 256);
    const uint32_t t = otsu_threshold(h);
    for (const uint64_t k : {2ull, 3ull, 5ull}) {
      Histogram scaled = h;
      for (auto& c : scaled.bins) c *= k;
      scaled.total = h.total * k;
      REQUIRE(otsu_threshold(scaled) == t);
    }
  }
}

TEST_CASE("histogram construction excludes nodata") {
  const std::vector<uint16_t> plane = {0, 0, 10, 20, 20};
  const Histogram with = Histogram::from_plane(plane, Dtype::u8, 0u);
  CHECK(with.total == 3);
  CHECK(with.bins[0] == 0);
  const Histogram without =
      Histogram::from_plane(plane, Dtype::u8, std::nullopt);
  CHECK(without.total == 5);
  CHECK(without.bins[0] == 2);
}

TEST_CASE("bimodal plane masks the bright half") {
  Raster r;
  r.header = {8, 4, 1, Dtype::u8, std::nullopt, {}};
  r.samples.resize(32);
  for (int row = 0; row < 4; ++row) {
    for (int col = 0; col < 8; ++col)
      r.samples[row * 8 + col] = col < 4 ? 20 : 230;
  }
  const CloudMask mask = cloud_mask_otsu(r, 0);
  for (int row = 0; row < 4; ++row) {
    for (int col = 0; col < 8; ++col)
      CHECK(mask.flags[row * 8 + col] == (col >= 4 ? 1 : 0));
  }
}

TEST_CASE("all-nodata raster is degenerate") {
  Raster r;
  r.header = {2, 2, 1, Dtype::u8, 0u, {}};
  r.samples = {0, 0, 0, 0};
  try {
    cloud_mask_otsu(r, 0);
    FAIL("expected DegenerateHistogram");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DegenerateHistogram);
  }
}

TEST_CASE("nodata pixels are never cloud") {
  Raster r;
  r.header = {4, 1, 1, Dtype::u8, 0u, {}};
  r.samples = {0, 20, 230, 230};
  const CloudMask mask = cloud_mask_otsu(r, 0);
  CHECK(mask.flags[0] == 0);
  CHECK(mask.flags[1] == 0);
  CHECK(mask.flags[2] == 1);
  CHECK(mask.flags[3] == 1);
}

TEST_CASE("otsu mask equals the exhaustive-threshold oracle on random planes") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    Raster r;
    r.header = {16, 16, 1, Dtype::u8, std::nullopt, {}};
    r.samples.resize(256);
    for (auto& s : r.samples) {
      // Bimodal around 40 and 200.
      s = static_cast<uint16_t>((rng() % 2) ? 180 + rng() % 41
                                            : 20 + rng() % 41);
    }
    const auto hist = Histogram::from_plane(r.samples, Dtype::u8,
                                            std::nullopt);
    const uint32_t t = exhaustive_otsu(hist);
    const CloudMask mask = cloud_mask_otsu(r, 0);
    for (size_t i = 0; i < r.samples.size(); ++i)
      REQUIRE(mask.flags[i] == (r.samples[i] > t ? 1 : 0));
  }
}

TEST_CASE("qa decode: bare cloud bit") {
  const QaBitSpec spec{4, std::nullopt, 0};
  const std::vector<uint16_t> plane = {1u << 4, 0};
  const CloudMask mask = cloud_mask_qa(plane, 2, 1, spec, 16);
  CHECK(mask.flags[0] == 1);
  CHECK(mask.flags[1] == 0);
}

TEST_CASE("qa decode: word 2800 with the default Collection-1 layout") {
  // 2800 = 0b101011110000: bit 4 set, bits 5..6 = 11b = confidence 3.
  const QaBitSpec spec;  // cloud_bit 4, confidence (5, 6), min 3
  const std::vector<uint16_t> plane = {2800};
  const CloudMask mask = cloud_mask_qa(plane, 1, 1, spec, 16);
  CHECK(mask.flags[0] == 1);

  // Same word with a higher bar stays clear.
  QaBitSpec strict = spec;
  strict.confidence_min = 4;
  CHECK(cloud_mask_qa(plane, 1, 1, strict, 16).flags[0] == 0);

  // Cloud bit set but low confidence: bits 5..6 = 01b.
  const std::vector<uint16_t> low = {(1u << 4) | (1u << 5)};
  CHECK(cloud_mask_qa(low, 1, 1, spec, 16).flags[0] == 0);
}

TEST_CASE("qa decode matches a bit-decomposition oracle on random words") {
  std::mt19937_64 rng(47);
  const QaBitSpec spec{3, {{6, 8}}, 2};
  std::vector<uint16_t> plane(512);
  for (auto& w : plane) w = static_cast<uint16_t>(rng());
  const CloudMask mask = cloud_mask_qa(plane, 32, 16, spec, 16);
  for (size_t i = 0; i < plane.size(); ++i) {
    const bool bit = (plane[i] / 8) % 2;  // bit 3 via arithmetic
    const int conf = (plane[i] / 64) % 8;  // bits 6..8
    REQUIRE(mask.flags[i] == ((bit && conf >= 2) ? 1 : 0));
  }
}

TEST_CASE("qa mask is pixelwise: permuting pixels permutes the mask") {
  std::mt19937_64 rng(53);
  QaBitSpec spec;
  std::vector<uint16_t> plane(64);
  for (auto& w : plane) w = static_cast<uint16_t>(rng());
  const CloudMask forward = cloud_mask_qa(plane, 8, 8, spec, 16);
  std::vector<uint16_t> reversed(plane.rbegin(), plane.rend());
  const CloudMask backward = cloud_mask_qa(reversed, 8, 8, spec, 16);
  for (size_t i = 0; i < plane.size(); ++i)
    CHECK(forward.flags[i] == backward.flags[plane.size() - 1 - i]);
}

TEST_CASE("bits outside the sample width are rejected") {
  const std::vector<uint16_t> plane = {0};
  QaBitSpec spec;
  spec.cloud_bit = 16;
  try {
    cloud_mask_qa(plane, 1, 1, spec, 16);
    FAIL("expected BitOutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::BitOutOfRange);
  }
  QaBitSpec bad_conf;
  bad_conf.confidence_bits = {{6, 5}};
  CHECK_THROWS_AS(cloud_mask_qa(plane, 1, 1, bad_conf, 16), Error);
}

TEST_CASE("mask renders as a {0, 16} label raster") {
  CloudMask mask;
  mask.width = 2;
  mask.height = 1;
  mask.flags = {1, 0};
  const LabelMap map = mask_to_labels(mask);
  CHECK(map.labels[0] == kCloudClassId);
  CHECK(map.labels[1] == 0);
  CHECK(map.palette.size() == 17);
}
