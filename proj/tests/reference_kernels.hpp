#pragma once

// Test-only oracles, written independently of the production kernels: plain
// nested loops, no shared helpers. Used to pin expected values.

#include <algorithm>
#include <cmath>
#include <limits>

#include "reskan/tensor.hpp"

namespace reskan::test_ref {

template <typename T>
double max_rel_diff(const Tensor<T>& a, const Tensor<T>& b, double floor = 1e-30) {
  double worst = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    const double x = a[i], y = b[i];
    worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), floor}));
  }
  return worst;
}

// Normwise relative agreement: ||a-b||_inf / max(||ref||_inf, floor).
template <typename T>
double normwise_rel_diff(const Tensor<T>& a, const Tensor<T>& b, double floor = 1e-12) {
  double peak = floor, diff = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    peak = std::max(peak, std::abs(static_cast<double>(a[i])));
    diff = std::max(diff, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return diff / peak;
}

// Direct six-nested-loop cross-correlation.
template <typename T>
Tensor<T> naive_conv2d(const Tensor<T>& x, const Tensor<T>& w, int stride, int pad) {
  const int N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Cout = w.dim(0), K = w.dim(2);
  const int Ho = (H + 2 * pad - K) / stride + 1;
  const int Wo = (W + 2 * pad - K) / stride + 1;
  Tensor<T> y({N, Cout, Ho, Wo});
  for (int n = 0; n < N; ++n)
    for (int co = 0; co < Cout; ++co)
      for (int oh = 0; oh < Ho; ++oh)
        for (int ow = 0; ow < Wo; ++ow) {
          double acc = 0;
          for (int ci = 0; ci < Cin; ++ci)
            for (int i = 0; i < K; ++i)
              for (int j = 0; j < K; ++j) {
                const int ih = oh * stride - pad + i;
                const int iw = ow * stride - pad + j;
                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                acc += double(x.at4(n, ci, ih, iw)) * double(w.at4(co, ci, i, j));
              }
          y.at4(n, co, oh, ow) = T(acc);
        }
  return y;
}

// Window mean with divisor k*k.
template <typename T>
Tensor<T> naive_avgpool(const Tensor<T>& x, int k, int stride, int pad) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Ho = (H + 2 * pad - k) / stride + 1;
  const int Wo = (W + 2 * pad - k) / stride + 1;
  Tensor<T> y({N, C, Ho, Wo});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int oh = 0; oh < Ho; ++oh)
        for (int ow = 0; ow < Wo; ++ow) {
          double acc = 0;
          for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
              const int ih = oh * stride - pad + i;
              const int iw = ow * stride - pad + j;
              if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
              acc += double(x.at4(n, c, ih, iw));
            }
          y.at4(n, c, oh, ow) = T(acc / (double(k) * k));
        }
  return y;
}

template <typename T>
Tensor<T> naive_maxpool(const Tensor<T>& x, int k, int stride, int pad) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Ho = (H + 2 * pad - k) / stride + 1;
  const int Wo = (W + 2 * pad - k) / stride + 1;
  Tensor<T> y({N, C, Ho, Wo});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int oh = 0; oh < Ho; ++oh)
        for (int ow = 0; ow < Wo; ++ow) {
          double best = -std::numeric_limits<double>::infinity();
          for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
              const int ih = oh * stride - pad + i;
              const int iw = ow * stride - pad + j;
              if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
              best = std::max(best, double(x.at4(n, c, ih, iw)));
            }
          y.at4(n, c, oh, ow) = T(best);
        }
  return y;
}

// Shared-mode KAN convolution evaluated straight from its definition: the
// per-channel activation applied to every window cell, then summed. The
// recurrence is evaluated locally, not via the production helpers.
template <typename T>
Tensor<T> naive_kan_shared(const Tensor<T>& x, const Tensor<T>& poly, const Tensor<T>& residual,
                           const Tensor<T>& rc, int k, int stride, int pad, int degree) {
  const int N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Cout = poly.dim(0);
  const int Ho = (H + 2 * pad - k) / stride + 1;
  const int Wo = (W + 2 * pad - k) / stride + 1;
  Tensor<T> y({N, Cout, Ho, Wo});
  for (int n = 0; n < N; ++n)
    for (int co = 0; co < Cout; ++co)
      for (int oh = 0; oh < Ho; ++oh)
        for (int ow = 0; ow < Wo; ++ow) {
          double acc = 0;
          for (int ci = 0; ci < Cin; ++ci)
            for (int i = 0; i < k; ++i)
              for (int j = 0; j < k; ++j) {
                const int ih = oh * stride - pad + i;
                const int iw = ow * stride - pad + j;
                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                const double u = double(x.at4(n, ci, ih, iw));
                const double t = std::tanh(u);
                double g_prev2 = 1.0, g_prev = t;
                double phi = double(poly[(int64_t(co) * Cin + ci) * (degree + 1) + 0]) * g_prev2;
                if (degree >= 1) phi += double(poly[(int64_t(co) * Cin + ci) * (degree + 1) + 1]) * g_prev;
                for (int d = 2; d <= degree; ++d) {
                  const double g = t * g_prev - double(rc[d - 2]) * g_prev2;
                  g_prev2 = g_prev;
                  g_prev = g;
                  phi += double(poly[(int64_t(co) * Cin + ci) * (degree + 1) + d]) * g;
                }
                phi += double(residual[int64_t(co) * Cin + ci]) * u / (1.0 + std::exp(-u));
                acc += phi;
              }
          y.at4(n, co, oh, ow) = T(acc);
        }
  return y;
}

}  // namespace reskan::test_ref
