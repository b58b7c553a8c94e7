#include "lulcseg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace lulcseg {

namespace {

// Class/band signature on the u8 scale, spread so classes stay separable in
// at least one band.
int class_band_mean(int cls, int band) {
  return 36 + (cls * 47 + band * 83) % 150;
}

uint16_t scale_to_dtype(int value_u8, Dtype dtype) {
  const int v = std::clamp(value_u8, 1, 255);  // 0 is reserved for nodata
  return dtype == Dtype::u8 ? static_cast<uint16_t>(v)
                            : static_cast<uint16_t>(v * 257);
}

}  // namespace

SyntheticScene make_blob_scene(int height, int width, int bands, int classes,
                               uint64_t seed, Dtype dtype,
                               bool nodata_margin) {
  require(classes >= 2, Errc::InvalidArgument, "need >= 2 classes");
  std::mt19937_64 rng(seed);

  struct Center {
    int r, c, cls;
  };
  const int ncenters = std::max(3 * (classes - 1), 12);
  std::vector<Center> centers;
  centers.reserve(ncenters);
  for (int i = 0; i < ncenters; ++i) {
    centers.push_back({static_cast<int>(rng() % height),
                       static_cast<int>(rng() % width),
                       1 + i % (classes - 1)});
  }

  SyntheticScene scene;
  scene.labels.width = width;
  scene.labels.height = height;
  scene.labels.palette = ClassPalette::synthetic(classes);
  scene.labels.labels.resize(static_cast<size_t>(width) * height);

  scene.raster.header.width = width;
  scene.raster.header.height = height;
  scene.raster.header.bands = bands;
  scene.raster.header.dtype = dtype;
  scene.raster.header.nodata = 0;
  scene.raster.samples.resize(static_cast<size_t>(width) * height * bands);

  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      int64_t best = -1;
      int cls = 1;
      for (const auto& center : centers) {
        const int64_t dr = r - center.r;
        const int64_t dc = c - center.c;
        const int64_t d2 = dr * dr + dc * dc;
        if (best < 0 || d2 < best) {
          best = d2;
          cls = center.cls;
        }
      }
      scene.labels.at(r, c) = static_cast<uint8_t>(cls);
    }
  }

  for (int b = 0; b < bands; ++b) {
    for (int r = 0; r < height; ++r) {
      for (int c = 0; c < width; ++c) {
        const int cls = scene.labels.at(r, c);
        const int noise = static_cast<int>(rng() % 25) - 12;
        scene.raster.at(b, r, c) =
            scale_to_dtype(class_band_mean(cls, b) + noise, dtype);
      }
    }
  }

  if (nodata_margin) {
    const int mr = std::max(2, height / 16);
    const int mc = std::max(2, width / 16);
    for (int r = 0; r < mr; ++r) {
      for (int c = 0; c < mc; ++c) {
        scene.labels.at(r, c) = 0;
        for (int b = 0; b < bands; ++b) scene.raster.at(b, r, c) = 0;
      }
    }
  }
  return scene;
}

SyntheticScene make_fine_structure_scene(int height, int width, int bands,
                                         uint64_t seed) {
  std::mt19937_64 rng(seed);
  SyntheticScene scene;
  scene.labels.width = width;
  scene.labels.height = height;
  scene.labels.palette = ClassPalette::synthetic(4);
  scene.labels.labels.assign(static_cast<size_t>(width) * height, 1);

  // Thin polylines, width 1-2.
  const int nlines = std::max(6, (height + width) / 24);
  for (int i = 0; i < nlines; ++i) {
    double r = static_cast<double>(rng() % height);
    double c = static_cast<double>(rng() % width);
    const double angle =
        2.0 * M_PI * static_cast<double>(rng() % 1024) / 1024.0;
    const double dr = std::sin(angle);
    const double dc = std::cos(angle);
    const int steps = static_cast<int>(rng() % (width / 2)) + width / 4;
    const int thick = static_cast<int>(rng() % 2);
    for (int s = 0; s < steps; ++s) {
      const int ir = static_cast<int>(std::lround(r));
      const int ic = static_cast<int>(std::lround(c));
      for (int w2 = 0; w2 <= thick; ++w2) {
        const int rr = ir + (std::abs(dc) > std::abs(dr) ? w2 : 0);
        const int cc = ic + (std::abs(dc) > std::abs(dr) ? 0 : w2);
        if (rr >= 0 && rr < height && cc >= 0 && cc < width)
          scene.labels.at(rr, cc) = 2;
      }
      r += dr;
      c += dc;
    }
  }

  // Small disks, radius 1..3.
  const int ndisks = std::max(10, height * width / 600);
  for (int i = 0; i < ndisks; ++i) {
    const int cr = static_cast<int>(rng() % height);
    const int cc = static_cast<int>(rng() % width);
    const int radius = 1 + static_cast<int>(rng() % 3);
    for (int r = std::max(0, cr - radius);
         r <= std::min(height - 1, cr + radius); ++r) {
      for (int c = std::max(0, cc - radius);
           c <= std::min(width - 1, cc + radius); ++c) {
        const int dr = r - cr;
        const int dc = c - cc;
        if (dr * dr + dc * dc <= radius * radius) scene.labels.at(r, c) = 3;
      }
    }
  }

  scene.raster.header.width = width;
  scene.raster.header.height = height;
  scene.raster.header.bands = bands;
  scene.raster.header.dtype = Dtype::u8;
  scene.raster.header.nodata = 0;
  scene.raster.samples.resize(static_cast<size_t>(width) * height * bands);
  for (int b = 0; b < bands; ++b) {
    for (int r = 0; r < height; ++r) {
      for (int c = 0; c < width; ++c) {
        // Lines and disks share one spectral signature: only shape tells
        // them apart, so the labels demand fine spatial context.
        const int cls = scene.labels.at(r, c);
        const int color_cls = cls == 3 ? 2 : cls;
        const int noise = static_cast<int>(rng() % 13) - 6;
        scene.raster.at(b, r, c) =
            scale_to_dtype(class_band_mean(color_cls, b) + noise, Dtype::u8);
      }
    }
  }
  return scene;
}

uint64_t add_cloud_patches(Raster& raster, uint64_t seed, int count) {
  std::mt19937_64 rng(seed);
  const int H = raster.header.height;
  const int W = raster.header.width;
  const uint32_t bright_lo =
      raster.header.dtype == Dtype::u8 ? 225 : 225 * 257;
  const uint32_t spread = raster.header.dtype == Dtype::u8 ? 30 : 30 * 257;
  uint64_t touched = 0;
  for (int i = 0; i < count; ++i) {
    const int cr = static_cast<int>(rng() % H);
    const int cc = static_cast<int>(rng() % W);
    const int ra = 4 + static_cast<int>(rng() % (std::max(H, W) / 12 + 1));
    const int rb = 3 + static_cast<int>(rng() % (std::max(H, W) / 16 + 1));
    for (int r = std::max(0, cr - ra); r <= std::min(H - 1, cr + ra); ++r) {
      for (int c = std::max(0, cc - rb); c <= std::min(W - 1, cc + rb); ++c) {
        const double x = static_cast<double>(r - cr) / ra;
        const double y = static_cast<double>(c - cc) / rb;
        if (x * x + y * y > 1.0) continue;
        bool counted = false;
        for (int b = 0; b < raster.header.bands; ++b) {
          const uint32_t v = bright_lo + rng() % spread;
          if (raster.at(b, r, c) != 0) {  // keep nodata holes
            raster.at(b, r, c) = static_cast<uint16_t>(v);
            counted = true;
          }
        }
        touched += counted;
      }
    }
  }
  return touched;
}

}  // namespace lulcseg
