#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "lulcseg/error.hpp"

namespace lulcseg::nn {

// Dense (batch, channels, height, width) array. float for training, double
// for finite-difference checks.
template <typename T>
struct Tensor4 {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> v;

  Tensor4() = default;
  Tensor4(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        v(static_cast<size_t>(n_) * c_ * h_ * w_, T(0)) {
    require(n_ >= 1 && c_ >= 1 && h_ >= 1 && w_ >= 1, Errc::ShapeMismatch,
            "tensor dims must be >= 1");
  }

  size_t size() const { return v.size(); }
  size_t index(int in, int ic, int ih, int iw) const {
    return ((static_cast<size_t>(in) * c + ic) * h + ih) * w + iw;
  }
  T at(int in, int ic, int ih, int iw) const {
    return v[index(in, ic, ih, iw)];
  }
  T& at(int in, int ic, int ih, int iw) { return v[index(in, ic, ih, iw)]; }

  bool same_dims(const Tensor4& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  bool all_finite() const {
    for (T x : v)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }

  template <typename U>
  Tensor4<U> cast() const {
    Tensor4<U> out(n, c, h, w);
    for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
    return out;
  }
};

using Tensor4f = Tensor4<float>;
using Tensor4d = Tensor4<double>;

// Batch of per-pixel class targets, (batch, height, width).
struct LabelBatch {
  int n = 0, h = 0, w = 0;
  std::vector<int32_t> v;

  LabelBatch() = default;
  LabelBatch(int n_, int h_, int w_)
      : n(n_), h(h_), w(w_), v(static_cast<size_t>(n_) * h_ * w_, 0) {}

  size_t size() const { return v.size(); }
  size_t index(int in, int ih, int iw) const {
    return (static_cast<size_t>(in) * h + ih) * w + iw;
  }
  int32_t at(int in, int ih, int iw) const { return v[index(in, ih, iw)]; }
  int32_t& at(int in, int ih, int iw) { return v[index(in, ih, iw)]; }
};

}  // namespace lulcseg::nn
