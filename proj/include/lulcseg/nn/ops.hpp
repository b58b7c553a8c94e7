#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>

#include "lulcseg/nn/parallel.hpp"
#include "lulcseg/nn/tensor.hpp"

namespace lulcseg::nn {

// 2-D convolution geometry. Dilation spaces the kernel taps, which is how
// the encoder trades downsampling for receptive field at reduced output
// strides.
struct ConvSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kh = 3, kw = 3;
  int sh = 1, sw = 1;
  int ph = 0, pw = 0;
  int dh = 1, dw = 1;

  void validate() const {
    require(in_channels >= 1 && out_channels >= 1 && kh >= 1 && kw >= 1 &&
                sh >= 1 && sw >= 1 && dh >= 1 && dw >= 1,
            Errc::ShapeMismatch, "conv spec fields must be >= 1");
    require(ph >= 0 && pw >= 0, Errc::ShapeMismatch,
            "conv padding must be >= 0");
  }
  int out_h(int h) const { return (h + 2 * ph - dh * (kh - 1) - 1) / sh + 1; }
  int out_w(int w) const { return (w + 2 * pw - dw * (kw - 1) - 1) / sw + 1; }
  // Output spatial size when this spec is used as a transposed convolution.
  int tconv_out_h(int h) const { return (h - 1) * sh - 2 * ph + kh; }
  int tconv_out_w(int w) const { return (w - 1) * sw - 2 * pw + kw; }
};

struct PoolSpec {
  int window = 2;
  int stride = 2;
  int dilation = 1;
  // clip=true keeps one output per stride step and drops taps that fall
  // outside the input; used by the stride-1 pools of atrous-converted
  // stages so spatial dims are preserved.
  bool clip = false;

  int out_h(int h) const {
    const int span = (window - 1) * dilation + 1;
    if (clip) return (h - 1) / stride + 1;
    return (h - span) / stride + 1;
  }
  int out_w(int w) const { return out_h(w); }
};

namespace detail {

// C[M x N] (+)= A[M x K] * B[K x N], all row-major. Parallel over output
// rows; each row is a serial accumulation, so results are identical for any
// thread count.
template <typename T>
void gemm_nn(int64_t M, int64_t K, int64_t N, const T* A, const T* B, T* C,
             bool accumulate) {
  parallel_for(0, M, [&](int64_t m0, int64_t m1) {
    for (int64_t m = m0; m < m1; ++m) {
      T* crow = C + m * N;
      if (!accumulate) std::fill(crow, crow + N, T(0));
      const T* arow = A + m * K;
      for (int64_t k = 0; k < K; ++k) {
        const T a = arow[k];
        if (a == T(0)) continue;
        const T* brow = B + k * N;
        for (int64_t j = 0; j < N; ++j) crow[j] += a * brow[j];
      }
    }
  });
}

// C[M x N] (+)= A[K x M]^T * B[K x N].
template <typename T>
void gemm_tn(int64_t M, int64_t K, int64_t N, const T* A, const T* B, T* C,
             bool accumulate) {
  parallel_for(0, M, [&](int64_t m0, int64_t m1) {
    for (int64_t m = m0; m < m1; ++m) {
      T* crow = C + m * N;
      if (!accumulate) std::fill(crow, crow + N, T(0));
      for (int64_t k = 0; k < K; ++k) {
        const T a = A[k * M + m];
        if (a == T(0)) continue;
        const T* brow = B + k * N;
        for (int64_t j = 0; j < N; ++j) crow[j] += a * brow[j];
      }
    }
  });
}

// C[M x K] += A[M x N] * B[K x N]^T (rows of A dotted with rows of B).
template <typename T>
void gemm_abt_acc(int64_t M, int64_t K, int64_t N, const T* A, const T* B,
                  T* C) {
  parallel_for(0, M, [&](int64_t m0, int64_t m1) {
    for (int64_t m = m0; m < m1; ++m) {
      const T* arow = A + m * N;
      T* crow = C + m * K;
      for (int64_t k = 0; k < K; ++k) {
        const T* brow = B + k * N;
        T acc = T(0);
        for (int64_t j = 0; j < N; ++j) acc += arow[j] * brow[j];
        crow[k] += acc;
      }
    }
  });
}

// Unrolls one batch item into a [Ci*kh*kw x oh*ow] patch matrix.
template <typename T>
void im2col(const T* input, int ci, int h, int w, const ConvSpec& spec,
            int oh, int ow, T* cols) {
  const int64_t N = static_cast<int64_t>(oh) * ow;
  parallel_for(0, ci, [&](int64_t c0, int64_t c1) {
    for (int64_t c = c0; c < c1; ++c) {
      const T* plane = input + c * h * w;
      T* block = cols + c * spec.kh * spec.kw * N;
      for (int ky = 0; ky < spec.kh; ++ky) {
        for (int kx = 0; kx < spec.kw; ++kx) {
          T* row = block + (static_cast<int64_t>(ky) * spec.kw + kx) * N;
          for (int y = 0; y < oh; ++y) {
            const int iy = y * spec.sh - spec.ph + ky * spec.dh;
            T* out = row + static_cast<int64_t>(y) * ow;
            if (iy < 0 || iy >= h) {
              std::fill(out, out + ow, T(0));
              continue;
            }
            const T* in_row = plane + static_cast<int64_t>(iy) * w;
            for (int x = 0; x < ow; ++x) {
              const int ix = x * spec.sw - spec.pw + kx * spec.dw;
              out[x] = (ix >= 0 && ix < w) ? in_row[ix] : T(0);
            }
          }
        }
      }
    }
  });
}

// Adjoint of im2col: scatter-adds patch columns back into an image.
template <typename T>
void col2im(const T* cols, int ci, int h, int w, const ConvSpec& spec,
            int oh, int ow, T* image) {
  const int64_t N = static_cast<int64_t>(oh) * ow;
  parallel_for(0, ci, [&](int64_t c0, int64_t c1) {
    for (int64_t c = c0; c < c1; ++c) {
      T* plane = image + c * h * w;
      const T* block = cols + c * spec.kh * spec.kw * N;
      for (int ky = 0; ky < spec.kh; ++ky) {
        for (int kx = 0; kx < spec.kw; ++kx) {
          const T* row = block + (static_cast<int64_t>(ky) * spec.kw + kx) * N;
          for (int y = 0; y < oh; ++y) {
            const int iy = y * spec.sh - spec.ph + ky * spec.dh;
            if (iy < 0 || iy >= h) continue;
            T* in_row = plane + static_cast<int64_t>(iy) * w;
            const T* src = row + static_cast<int64_t>(y) * ow;
            for (int x = 0; x < ow; ++x) {
              const int ix = x * spec.sw - spec.pw + kx * spec.dw;
              if (ix >= 0 && ix < w) in_row[ix] += src[x];
            }
          }
        }
      }
    }
  });
}

}  // namespace detail

// weights: (out_channels, in_channels, kh, kw); bias: out_channels.
template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& input, const Tensor4<T>& weights,
                          const std::vector<T>& bias, const ConvSpec& spec) {
  spec.validate();
  require(input.c == spec.in_channels, Errc::ShapeMismatch,
          "conv input channels " + std::to_string(input.c) + " != spec " +
              std::to_string(spec.in_channels));
  require(weights.n == spec.out_channels && weights.c == spec.in_channels &&
              weights.h == spec.kh && weights.w == spec.kw,
          Errc::ShapeMismatch, "conv weight dims disagree with spec");
  require(bias.size() == static_cast<size_t>(spec.out_channels),
          Errc::ShapeMismatch, "conv bias length != out channels");
  const int oh = spec.out_h(input.h);
  const int ow = spec.out_w(input.w);
  require(oh >= 1 && ow >= 1, Errc::EmptyOutput,
          "conv output would be empty");

  Tensor4<T> out(input.n, spec.out_channels, oh, ow);
  const int64_t K = static_cast<int64_t>(spec.in_channels) * spec.kh * spec.kw;
  const int64_t N = static_cast<int64_t>(oh) * ow;
  std::vector<T> cols(static_cast<size_t>(K) * N);
  for (int item = 0; item < input.n; ++item) {
    detail::im2col(&input.v[input.index(item, 0, 0, 0)], input.c, input.h,
                   input.w, spec, oh, ow, cols.data());
    T* dst = &out.v[out.index(item, 0, 0, 0)];
    detail::gemm_nn<T>(spec.out_channels, K, N, weights.v.data(), cols.data(),
                       dst, false);
    for (int co = 0; co < spec.out_channels; ++co) {
      T* row = dst + static_cast<int64_t>(co) * N;
      const T b = bias[co];
      for (int64_t j = 0; j < N; ++j) row[j] += b;
    }
  }
  return out;
}

template <typename T>
struct Conv2dGrads {
  Tensor4<T> input;
  Tensor4<T> weights;
  std::vector<T> bias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor4<T>& grad_out,
                               const Tensor4<T>& input,
                               const Tensor4<T>& weights,
                               const ConvSpec& spec) {
  spec.validate();
  const int oh = spec.out_h(input.h);
  const int ow = spec.out_w(input.w);
  require(grad_out.n == input.n && grad_out.c == spec.out_channels &&
              grad_out.h == oh && grad_out.w == ow,
          Errc::ShapeMismatch, "conv grad dims disagree with forward pass");

  Conv2dGrads<T> grads;
  grads.input = Tensor4<T>(input.n, input.c, input.h, input.w);
  grads.weights = Tensor4<T>(weights.n, weights.c, weights.h, weights.w);
  grads.bias.assign(spec.out_channels, T(0));

  const int64_t K = static_cast<int64_t>(spec.in_channels) * spec.kh * spec.kw;
  const int64_t N = static_cast<int64_t>(oh) * ow;
  std::vector<T> cols(static_cast<size_t>(K) * N);
  std::vector<T> gcols(static_cast<size_t>(K) * N);
  std::fill(grads.input.v.begin(), grads.input.v.end(), T(0));

  for (int item = 0; item < input.n; ++item) {
    const T* gy = &grad_out.v[grad_out.index(item, 0, 0, 0)];

    // d/bias: plain sums over the output plane.
    for (int co = 0; co < spec.out_channels; ++co) {
      const T* row = gy + static_cast<int64_t>(co) * N;
      T acc = T(0);
      for (int64_t j = 0; j < N; ++j) acc += row[j];
      grads.bias[co] += acc;
    }

    // d/weights: gW += gY * cols^T.
    detail::im2col(&input.v[input.index(item, 0, 0, 0)], input.c, input.h,
                   input.w, spec, oh, ow, cols.data());
    detail::gemm_abt_acc<T>(spec.out_channels, K, N, gy, cols.data(),
                            grads.weights.v.data());

    // d/input: scatter W^T * gY back through the patch geometry.
    detail::gemm_tn<T>(K, spec.out_channels, N, weights.v.data(), gy,
                       gcols.data(), false);
    detail::col2im(gcols.data(), input.c, input.h, input.w, spec, oh, ow,
                   &grads.input.v[grads.input.index(item, 0, 0, 0)]);
  }
  return grads;
}

// Transposed convolution; weights: (in_channels, out_channels, kh, kw).
// Forward equals the input-gradient of a conv with the same kernel, which
// gives the adjoint identity <conv(x), y> = <x, tconv(y)>.
template <typename T>
Tensor4<T> tconv2d_forward(const Tensor4<T>& input, const Tensor4<T>& weights,
                           const std::vector<T>& bias, const ConvSpec& spec) {
  spec.validate();
  require(spec.dh == 1 && spec.dw == 1, Errc::ShapeMismatch,
          "transposed conv does not take dilation");
  require(input.c == spec.in_channels, Errc::ShapeMismatch,
          "tconv input channels disagree with spec");
  require(weights.n == spec.in_channels && weights.c == spec.out_channels &&
              weights.h == spec.kh && weights.w == spec.kw,
          Errc::ShapeMismatch, "tconv weight dims disagree with spec");
  require(bias.size() == static_cast<size_t>(spec.out_channels),
          Errc::ShapeMismatch, "tconv bias length != out channels");
  const int oh = spec.tconv_out_h(input.h);
  const int ow = spec.tconv_out_w(input.w);
  require(oh >= 1 && ow >= 1, Errc::EmptyOutput,
          "tconv output would be empty");

  // In conv terms the output is the "input" plane and `input` is the
  // "output" gradient.
  ConvSpec conv = spec;
  conv.in_channels = spec.out_channels;
  conv.out_channels = spec.in_channels;

  Tensor4<T> out(input.n, spec.out_channels, oh, ow);
  const int64_t K = static_cast<int64_t>(spec.out_channels) * spec.kh * spec.kw;
  const int64_t N = static_cast<int64_t>(input.h) * input.w;
  std::vector<T> gcols(static_cast<size_t>(K) * N);
  std::fill(out.v.begin(), out.v.end(), T(0));
  for (int item = 0; item < input.n; ++item) {
    detail::gemm_tn<T>(K, spec.in_channels, N, weights.v.data(),
                       &input.v[input.index(item, 0, 0, 0)], gcols.data(),
                       false);
    detail::col2im(gcols.data(), spec.out_channels, oh, ow, conv, input.h,
                   input.w, &out.v[out.index(item, 0, 0, 0)]);
  }
  const int64_t plane = static_cast<int64_t>(oh) * ow;
  for (int item = 0; item < input.n; ++item) {
    for (int co = 0; co < spec.out_channels; ++co) {
      T* row = &out.v[out.index(item, co, 0, 0)];
      const T b = bias[co];
      for (int64_t j = 0; j < plane; ++j) row[j] += b;
    }
  }
  return out;
}

template <typename T>
struct Tconv2dGrads {
  Tensor4<T> input;
  Tensor4<T> weights;
  std::vector<T> bias;
};

template <typename T>
Tconv2dGrads<T> tconv2d_backward(const Tensor4<T>& grad_out,
                                 const Tensor4<T>& input,
                                 const Tensor4<T>& weights,
                                 const ConvSpec& spec) {
  spec.validate();
  const int oh = spec.tconv_out_h(input.h);
  const int ow = spec.tconv_out_w(input.w);
  require(grad_out.n == input.n && grad_out.c == spec.out_channels &&
              grad_out.h == oh && grad_out.w == ow,
          Errc::ShapeMismatch, "tconv grad dims disagree with forward pass");

  ConvSpec conv = spec;
  conv.in_channels = spec.out_channels;
  conv.out_channels = spec.in_channels;

  Tconv2dGrads<T> grads;
  grads.input = Tensor4<T>(input.n, input.c, input.h, input.w);
  grads.weights = Tensor4<T>(weights.n, weights.c, weights.h, weights.w);
  grads.bias.assign(spec.out_channels, T(0));

  const int64_t K = static_cast<int64_t>(spec.out_channels) * spec.kh * spec.kw;
  const int64_t N = static_cast<int64_t>(input.h) * input.w;
  const int64_t out_plane = static_cast<int64_t>(oh) * ow;
  std::vector<T> cols(static_cast<size_t>(K) * N);

  for (int item = 0; item < input.n; ++item) {
    const T* gy = &grad_out.v[grad_out.index(item, 0, 0, 0)];
    for (int co = 0; co < spec.out_channels; ++co) {
      const T* row = gy + static_cast<int64_t>(co) * out_plane;
      T acc = T(0);
      for (int64_t j = 0; j < out_plane; ++j) acc += row[j];
      grads.bias[co] += acc;
    }

    // gy lives in the conv "input" plane; running the patch-gather over it
    // turns both remaining gradients into plain matrix products.
    detail::im2col(gy, spec.out_channels, oh, ow, conv, input.h, input.w,
                   cols.data());
    detail::gemm_nn<T>(spec.in_channels, K, N, weights.v.data(), cols.data(),
                       &grads.input.v[grads.input.index(item, 0, 0, 0)],
                       false);
    detail::gemm_abt_acc<T>(spec.in_channels, K, N,
                            &input.v[input.index(item, 0, 0, 0)], cols.data(),
                            grads.weights.v.data());
  }
  return grads;
}

template <typename T>
struct PoolResult {
  Tensor4<T> output;
  std::vector<int64_t> argmax;  // flat source index per output cell
};

template <typename T>
PoolResult<T> maxpool_forward(const Tensor4<T>& input, const PoolSpec& spec) {
  require(spec.window >= 1 && spec.stride >= 1 && spec.dilation >= 1,
          Errc::ShapeMismatch, "pool spec fields must be >= 1");
  const int span = (spec.window - 1) * spec.dilation + 1;
  if (!spec.clip) {
    require(span <= input.h && span <= input.w, Errc::ShapeMismatch,
            "pool window exceeds spatial dims");
  }
  const int oh = spec.out_h(input.h);
  const int ow = spec.out_w(input.w);
  require(oh >= 1 && ow >= 1, Errc::EmptyOutput, "pool output would be empty");

  PoolResult<T> result{Tensor4<T>(input.n, input.c, oh, ow), {}};
  result.argmax.assign(result.output.size(), 0);

  const int64_t planes = static_cast<int64_t>(input.n) * input.c;
  parallel_for(0, planes, [&](int64_t p0, int64_t p1) {
    for (int64_t p = p0; p < p1; ++p) {
      const T* in_plane = input.v.data() + p * input.h * input.w;
      T* out_plane = result.output.v.data() + p * oh * ow;
      int64_t* arg_plane = result.argmax.data() + p * oh * ow;
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          T best = -std::numeric_limits<T>::infinity();
          int64_t best_idx = -1;
          // Row-major tap scan; first occurrence wins ties.
          for (int ky = 0; ky < spec.window; ++ky) {
            const int iy = y * spec.stride + ky * spec.dilation;
            if (iy >= input.h) break;
            for (int kx = 0; kx < spec.window; ++kx) {
              const int ix = x * spec.stride + kx * spec.dilation;
              if (ix >= input.w) break;
              const T val = in_plane[static_cast<int64_t>(iy) * input.w + ix];
              if (val > best) {
                best = val;
                best_idx = p * input.h * input.w +
                           static_cast<int64_t>(iy) * input.w + ix;
              }
            }
          }
          out_plane[static_cast<int64_t>(y) * ow + x] = best;
          arg_plane[static_cast<int64_t>(y) * ow + x] = best_idx;
        }
      }
    }
  });
  return result;
}

template <typename T>
Tensor4<T> maxpool_backward(const Tensor4<T>& grad_out,
                            const std::vector<int64_t>& argmax, int in_n,
                            int in_c, int in_h, int in_w) {
  require(argmax.size() == grad_out.size(), Errc::ShapeMismatch,
          "argmax record size != grad size");
  Tensor4<T> grad_in(in_n, in_c, in_h, in_w);
  const int64_t out_plane = static_cast<int64_t>(grad_out.h) * grad_out.w;
  const int64_t planes = static_cast<int64_t>(in_n) * in_c;
  // Each (n, c) plane only ever routes into itself, so planes are
  // independent.
  parallel_for(0, planes, [&](int64_t p0, int64_t p1) {
    for (int64_t p = p0; p < p1; ++p) {
      const T* gy = grad_out.v.data() + p * out_plane;
      const int64_t* args = argmax.data() + p * out_plane;
      for (int64_t j = 0; j < out_plane; ++j) grad_in.v[args[j]] += gy[j];
    }
  });
  return grad_in;
}

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& input) {
  Tensor4<T> out = input;
  for (T& x : out.v) x = x > T(0) ? x : T(0);
  return out;
}

template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& grad_out, const Tensor4<T>& input) {
  require(grad_out.same_dims(input), Errc::ShapeMismatch,
          "relu grad dims != input dims");
  Tensor4<T> grad_in = grad_out;
  for (size_t i = 0; i < grad_in.v.size(); ++i) {
    if (input.v[i] <= T(0)) grad_in.v[i] = T(0);
  }
  return grad_in;
}

template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
  require(a.n == b.n && a.h == b.h && a.w == b.w, Errc::ShapeMismatch,
          "concat operands disagree on batch or spatial dims");
  Tensor4<T> out(a.n, a.c + b.c, a.h, a.w);
  const size_t plane = static_cast<size_t>(a.h) * a.w;
  for (int item = 0; item < a.n; ++item) {
    std::copy_n(&a.v[a.index(item, 0, 0, 0)], plane * a.c,
                &out.v[out.index(item, 0, 0, 0)]);
    std::copy_n(&b.v[b.index(item, 0, 0, 0)], plane * b.c,
                &out.v[out.index(item, a.c, 0, 0)]);
  }
  return out;
}

template <typename T>
std::pair<Tensor4<T>, Tensor4<T>> split_channels(const Tensor4<T>& grad,
                                                 int c_first) {
  require(c_first >= 1 && c_first < grad.c, Errc::ShapeMismatch,
          "channel split point outside tensor");
  Tensor4<T> a(grad.n, c_first, grad.h, grad.w);
  Tensor4<T> b(grad.n, grad.c - c_first, grad.h, grad.w);
  const size_t plane = static_cast<size_t>(grad.h) * grad.w;
  for (int item = 0; item < grad.n; ++item) {
    std::copy_n(&grad.v[grad.index(item, 0, 0, 0)], plane * a.c,
                &a.v[a.index(item, 0, 0, 0)]);
    std::copy_n(&grad.v[grad.index(item, c_first, 0, 0)], plane * b.c,
                &b.v[b.index(item, 0, 0, 0)]);
  }
  return {std::move(a), std::move(b)};
}

// Per-pixel channel softmax (numerically stabilized).
template <typename T>
Tensor4<T> softmax_channels(const Tensor4<T>& logits) {
  Tensor4<T> probs(logits.n, logits.c, logits.h, logits.w);
  const int64_t plane = static_cast<int64_t>(logits.h) * logits.w;
  for (int item = 0; item < logits.n; ++item) {
    const T* in = &logits.v[logits.index(item, 0, 0, 0)];
    T* out = &probs.v[probs.index(item, 0, 0, 0)];
    for (int64_t px = 0; px < plane; ++px) {
      T mx = in[px];
      for (int c = 1; c < logits.c; ++c)
        mx = std::max(mx, in[c * plane + px]);
      T denom = T(0);
      for (int c = 0; c < logits.c; ++c) {
        const T e = std::exp(in[c * plane + px] - mx);
        out[c * plane + px] = e;
        denom += e;
      }
      for (int c = 0; c < logits.c; ++c) out[c * plane + px] /= denom;
    }
  }
  return probs;
}

template <typename T>
struct SoftmaxLoss {
  double loss = 0.0;
  Tensor4<T> grad_logits;
  uint64_t counted_pixels = 0;
};

// Mean negative log-likelihood over non-ignored pixels, with the matching
// logit gradient.
template <typename T>
SoftmaxLoss<T> softmax_cross_entropy(const Tensor4<T>& logits,
                                     const LabelBatch& targets,
                                     std::optional<int> ignore_class) {
  require(targets.n == logits.n && targets.h == logits.h &&
              targets.w == logits.w,
          Errc::ShapeMismatch, "target dims disagree with logits");
  for (int32_t t : targets.v) {
    require(t >= 0 && t < logits.c, Errc::TargetOutOfRange,
            "target class " + std::to_string(t) + " outside [0, " +
                std::to_string(logits.c) + ")");
  }

  SoftmaxLoss<T> result;
  result.grad_logits = Tensor4<T>(logits.n, logits.c, logits.h, logits.w);
  std::fill(result.grad_logits.v.begin(), result.grad_logits.v.end(), T(0));

  uint64_t counted = 0;
  for (const int32_t t : targets.v) {
    counted += !(ignore_class && t == *ignore_class);
  }
  result.counted_pixels = counted;
  if (counted == 0) return result;

  const int64_t plane = static_cast<int64_t>(logits.h) * logits.w;
  const double inv_count = 1.0 / static_cast<double>(counted);
  double loss = 0.0;
  for (int item = 0; item < logits.n; ++item) {
    const T* in = &logits.v[logits.index(item, 0, 0, 0)];
    T* grad = &result.grad_logits.v[result.grad_logits.index(item, 0, 0, 0)];
    const int32_t* tgt = &targets.v[targets.index(item, 0, 0)];
    for (int64_t px = 0; px < plane; ++px) {
      const int32_t t = tgt[px];
      if (ignore_class && t == *ignore_class) continue;
      T mx = in[px];
      for (int c = 1; c < logits.c; ++c)
        mx = std::max(mx, in[c * plane + px]);
      double denom = 0.0;
      for (int c = 0; c < logits.c; ++c)
        denom += std::exp(static_cast<double>(in[c * plane + px] - mx));
      const double log_denom = std::log(denom);
      loss += log_denom -
              static_cast<double>(in[t * plane + px] - mx);
      for (int c = 0; c < logits.c; ++c) {
        const double p =
            std::exp(static_cast<double>(in[c * plane + px] - mx)) / denom;
        const double indicator = (c == t) ? 1.0 : 0.0;
        grad[c * plane + px] = static_cast<T>((p - indicator) * inv_count);
      }
    }
  }
  result.loss = loss * inv_count;
  return result;
}

}  // namespace lulcseg::nn
