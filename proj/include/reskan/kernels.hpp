#pragma once

// Compute kernels behind the autograd ops. Parallel loops always partition
// independent output elements; every accumulation runs in a fixed serial
// order inside one element and in double precision, so results do not depend
// on the number of OpenMP threads.

#include <omp.h>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "reskan/errors.hpp"
#include "reskan/tensor.hpp"

namespace reskan::kernels {

inline int conv_out_extent(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

inline void check_window(int in, int k, int pad, const char* axis) {
  if (k > in + 2 * pad)
    throw ConfigError(std::string("window of size ") + std::to_string(k) + " does not fit padded input extent " +
                      std::to_string(in + 2 * pad) + " along " + axis);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double silu_val(double x) { return x * sigmoid(x); }
inline double silu_grad(double x) {
  double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

// ---------------------------------------------------------------------------
// Elementwise maps
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> unary_tanh(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  const int64_t n = x.numel();
#pragma omp parallel for if (n > 4096)
  for (int64_t i = 0; i < n; ++i) y[i] = static_cast<T>(std::tanh(static_cast<double>(x[i])));
  return y;
}

template <typename T>
Tensor<T> unary_silu(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  const int64_t n = x.numel();
#pragma omp parallel for if (n > 4096)
  for (int64_t i = 0; i < n; ++i) y[i] = static_cast<T>(silu_val(static_cast<double>(x[i])));
  return y;
}

// ---------------------------------------------------------------------------
// Ordinary cross-correlation
// ---------------------------------------------------------------------------

template <typename T>
void conv2d_check(const Tensor<T>& x, const Tensor<T>& w, int stride, int pad) {
  if (x.ndim() != 4) throw ConfigError("conv2d input must be 4-d [N,C,H,W], got " + Tensor<T>::shape_str(x.shape()));
  if (w.ndim() != 4) throw ConfigError("conv2d kernel must be 4-d [Cout,Cin,k,k], got " + Tensor<T>::shape_str(w.shape()));
  if (w.dim(1) != x.dim(1))
    throw ConfigError("conv2d channel mismatch: input C=" + std::to_string(x.dim(1)) + " vs kernel Cin=" +
                      std::to_string(w.dim(1)));
  if (w.dim(2) != w.dim(3)) throw ConfigError("conv2d kernel must be square");
  if (stride < 1) throw ConfigError("conv2d stride must be positive");
  if (pad < 0) throw ConfigError("conv2d padding must be non-negative");
  check_window(x.dim(2), w.dim(2), pad, "H");
  check_window(x.dim(3), w.dim(3), pad, "W");
}

template <typename T>
Tensor<T> conv2d_fwd(const Tensor<T>& x, const Tensor<T>& w, int stride, int pad) {
  conv2d_check(x, w, stride, pad);
  const int N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Cout = w.dim(0), K = w.dim(2);
  const int Ho = conv_out_extent(H, K, stride, pad), Wo = conv_out_extent(W, K, stride, pad);
  Tensor<T> y({N, Cout, Ho, Wo});
#pragma omp parallel for collapse(2)
  for (int n = 0; n < N; ++n) {
    for (int co = 0; co < Cout; ++co) {
      for (int oh = 0; oh < Ho; ++oh) {
        for (int ow = 0; ow < Wo; ++ow) {
          double acc = 0.0;
          for (int ci = 0; ci < Cin; ++ci) {
            for (int i = 0; i < K; ++i) {
              const int ih = oh * stride - pad + i;
              if (ih < 0 || ih >= H) continue;
              for (int j = 0; j < K; ++j) {
                const int iw = ow * stride - pad + j;
                if (iw < 0 || iw >= W) continue;
                acc += static_cast<double>(x.at4(n, ci, ih, iw)) * static_cast<double>(w.at4(co, ci, i, j));
              }
            }
          }
          y.at4(n, co, oh, ow) = static_cast<T>(acc);
        }
      }
    }
  }
  return y;
}

template <typename T>
void conv2d_bwd(const Tensor<T>& x, const Tensor<T>& w, int stride, int pad, const Tensor<T>& gy, Tensor<T>* gx,
                Tensor<T>* gw) {
  const int N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Cout = w.dim(0), K = w.dim(2);
  const int Ho = gy.dim(2), Wo = gy.dim(3);
  if (gx) {
#pragma omp parallel for collapse(2)
    for (int n = 0; n < N; ++n) {
      for (int ci = 0; ci < Cin; ++ci) {
        for (int ih = 0; ih < H; ++ih) {
          for (int iw = 0; iw < W; ++iw) {
            double acc = 0.0;
            for (int i = 0; i < K; ++i) {
              const int num_h = ih + pad - i;
              if (num_h < 0 || num_h % stride) continue;
              const int oh = num_h / stride;
              if (oh >= Ho) continue;
              for (int j = 0; j < K; ++j) {
                const int num_w = iw + pad - j;
                if (num_w < 0 || num_w % stride) continue;
                const int ow = num_w / stride;
                if (ow >= Wo) continue;
                for (int co = 0; co < Cout; ++co)
                  acc += static_cast<double>(gy.at4(n, co, oh, ow)) * static_cast<double>(w.at4(co, ci, i, j));
              }
            }
            gx->at4(n, ci, ih, iw) += static_cast<T>(acc);
          }
        }
      }
    }
  }
  if (gw) {
#pragma omp parallel for collapse(2)
    for (int co = 0; co < Cout; ++co) {
      for (int ci = 0; ci < Cin; ++ci) {
        for (int i = 0; i < K; ++i) {
          for (int j = 0; j < K; ++j) {
            double acc = 0.0;
            for (int n = 0; n < N; ++n) {
              for (int oh = 0; oh < Ho; ++oh) {
                const int ih = oh * stride - pad + i;
                if (ih < 0 || ih >= H) continue;
                for (int ow = 0; ow < Wo; ++ow) {
                  const int iw = ow * stride - pad + j;
                  if (iw < 0 || iw >= W) continue;
                  acc += static_cast<double>(gy.at4(n, co, oh, ow)) * static_cast<double>(x.at4(n, ci, ih, iw));
                }
              }
            }
            gw->at4(co, ci, i, j) += static_cast<T>(acc);
          }
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Depthwise all-ones window sum (the fixed aggregation of the decoupled path)
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> box_sum_fwd(const Tensor<T>& x, int k, int stride, int pad) {
  if (x.ndim() != 4) throw ConfigError("box_sum input must be 4-d");
  check_window(x.dim(2), k, pad, "H");
  check_window(x.dim(3), k, pad, "W");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Ho = conv_out_extent(H, k, stride, pad), Wo = conv_out_extent(W, k, stride, pad);
  Tensor<T> y({N, C, Ho, Wo});
#pragma omp parallel for collapse(2)
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      for (int oh = 0; oh < Ho; ++oh) {
        for (int ow = 0; ow < Wo; ++ow) {
          double acc = 0.0;
          for (int i = 0; i < k; ++i) {
            const int ih = oh * stride - pad + i;
            if (ih < 0 || ih >= H) continue;
            for (int j = 0; j < k; ++j) {
              const int iw = ow * stride - pad + j;
              if (iw < 0 || iw >= W) continue;
              acc += static_cast<double>(x.at4(n, c, ih, iw));
            }
          }
          y.at4(n, c, oh, ow) = static_cast<T>(acc);
        }
      }
    }
  }
  return y;
}

template <typename T>
void box_sum_bwd(const Tensor<T>& x, int k, int stride, int pad, const Tensor<T>& gy, Tensor<T>* gx) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Ho = gy.dim(2), Wo = gy.dim(3);
#pragma omp parallel for collapse(2)
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      for (int ih = 0; ih < H; ++ih) {
        for (int iw = 0; iw < W; ++iw) {
          double acc = 0.0;
          for (int i = 0; i < k; ++i) {
            const int num_h = ih + pad - i;
            if (num_h < 0 || num_h % stride) continue;
            const int oh = num_h / stride;
            if (oh >= Ho) continue;
            for (int j = 0; j < k; ++j) {
              const int num_w = iw + pad - j;
              if (num_w < 0 || num_w % stride) continue;
              const int ow = num_w / stride;
              if (ow >= Wo) continue;
              acc += static_cast<double>(gy.at4(n, c, oh, ow));
            }
          }
          gx->at4(n, c, ih, iw) += static_cast<T>(acc);
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------

// Max pool saves the flat input index of the window maximum. Ties resolve to
// the first index in row-major order. Padded cells never win.
template <typename T>
Tensor<T> maxpool_fwd(const Tensor<T>& x, int k, int stride, int pad, std::vector<int64_t>* argmax) {
  check_window(x.dim(2), k, pad, "H");
  check_window(x.dim(3), k, pad, "W");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Ho = conv_out_extent(H, k, stride, pad), Wo = conv_out_extent(W, k, stride, pad);
  Tensor<T> y({N, C, Ho, Wo});
  argmax->assign(static_cast<size_t>(y.numel()), -1);
#pragma omp parallel for collapse(2)
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      for (int oh = 0; oh < Ho; ++oh) {
        for (int ow = 0; ow < Wo; ++ow) {
          T best = T(0);
          int64_t best_idx = -1;
          for (int i = 0; i < k; ++i) {
            const int ih = oh * stride - pad + i;
            if (ih < 0 || ih >= H) continue;
            for (int j = 0; j < k; ++j) {
              const int iw = ow * stride - pad + j;
              if (iw < 0 || iw >= W) continue;
              const int64_t idx = ((int64_t(n) * C + c) * H + ih) * W + iw;
              const T v = x[idx];
              if (best_idx < 0 || v > best) {
                best = v;
                best_idx = idx;
              }
            }
          }
          if (best_idx < 0) throw ConfigError("max pool window contains no input cells");
          const int64_t out_idx = ((int64_t(n) * C + c) * Ho + oh) * Wo + ow;
          y[out_idx] = best;
          (*argmax)[static_cast<size_t>(out_idx)] = best_idx;
        }
      }
    }
  }
  return y;
}

template <typename T>
void maxpool_bwd(const std::vector<int64_t>& argmax, const Tensor<T>& gy, Tensor<T>* gx) {
  const int N = gy.dim(0), C = gy.dim(1);
  const int64_t plane = gy.numel() / (int64_t(N) * C);
#pragma omp parallel for collapse(2)
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const int64_t base = (int64_t(n) * C + c) * plane;
      for (int64_t p = 0; p < plane; ++p) (*gx)[argmax[static_cast<size_t>(base + p)]] += gy[base + p];
    }
  }
}

// Average pool divides by the full window size k*k; padded cells count as
// zeros in the numerator.
template <typename T>
Tensor<T> avgpool_fwd(const Tensor<T>& x, int k, int stride, int pad) {
  Tensor<T> s = box_sum_fwd(x, k, stride, pad);
  const double inv = 1.0 / (double(k) * k);
  for (int64_t i = 0; i < s.numel(); ++i) s[i] = static_cast<T>(static_cast<double>(s[i]) * inv);
  return s;
}

template <typename T>
void avgpool_bwd(const Tensor<T>& x, int k, int stride, int pad, const Tensor<T>& gy, Tensor<T>* gx) {
  Tensor<T> scaled(gy.shape());
  const double inv = 1.0 / (double(k) * k);
  for (int64_t i = 0; i < gy.numel(); ++i) scaled[i] = static_cast<T>(static_cast<double>(gy[i]) * inv);
  box_sum_bwd(x, k, stride, pad, scaled, gx);
}

template <typename T>
Tensor<T> global_avgpool_fwd(const Tensor<T>& x) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor<T> y({N, C, 1, 1});
  const double inv = 1.0 / (double(H) * W);
#pragma omp parallel for collapse(2)
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      double acc = 0.0;
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) acc += static_cast<double>(x.at4(n, c, h, w));
      y.at4(n, c, 0, 0) = static_cast<T>(acc * inv);
    }
  }
  return y;
}

template <typename T>
void global_avgpool_bwd(const std::vector<int>& in_shape, const Tensor<T>& gy, Tensor<T>* gx) {
  const int N = in_shape[0], C = in_shape[1], H = in_shape[2], W = in_shape[3];
  const double inv = 1.0 / (double(H) * W);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const T g = static_cast<T>(static_cast<double>(gy.at4(n, c, 0, 0)) * inv);
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) gx->at4(n, c, h, w) += g;
    }
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

template <typename T>
struct BatchNormSaved {
  std::vector<double> mean;
  std::vector<double> invstd;
  bool train = false;
};

template <typename T>
Tensor<T> batchnorm_fwd(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, Tensor<T>& running_mean,
                        Tensor<T>& running_var, bool train, double eps, double momentum, BatchNormSaved<T>* saved) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t m = int64_t(N) * H * W;
  if (train && m < 2) throw TrainError("batch_norm2d needs at least 2 values per channel in train mode");
  Tensor<T> y(x.shape());
  saved->mean.assign(C, 0.0);
  saved->invstd.assign(C, 0.0);
  saved->train = train;
#pragma omp parallel for
  for (int c = 0; c < C; ++c) {
    double mean, var;
    if (train) {
      double s = 0.0;
      for (int n = 0; n < N; ++n)
        for (int h = 0; h < H; ++h)
          for (int w = 0; w < W; ++w) s += static_cast<double>(x.at4(n, c, h, w));
      mean = s / double(m);
      double sv = 0.0;
      for (int n = 0; n < N; ++n)
        for (int h = 0; h < H; ++h)
          for (int w = 0; w < W; ++w) {
            const double d = static_cast<double>(x.at4(n, c, h, w)) - mean;
            sv += d * d;
          }
      var = sv / double(m);
      const double unbiased = sv / double(m - 1);
      running_mean[c] = static_cast<T>((1.0 - momentum) * static_cast<double>(running_mean[c]) + momentum * mean);
      running_var[c] = static_cast<T>((1.0 - momentum) * static_cast<double>(running_var[c]) + momentum * unbiased);
    } else {
      mean = static_cast<double>(running_mean[c]);
      var = static_cast<double>(running_var[c]);
    }
    const double invstd = 1.0 / std::sqrt(var + eps);
    saved->mean[c] = mean;
    saved->invstd[c] = invstd;
    const double g = static_cast<double>(gamma[c]), b = static_cast<double>(beta[c]);
    for (int n = 0; n < N; ++n)
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w)
          y.at4(n, c, h, w) = static_cast<T>((static_cast<double>(x.at4(n, c, h, w)) - mean) * invstd * g + b);
  }
  return y;
}

template <typename T>
void batchnorm_bwd(const Tensor<T>& x, const Tensor<T>& gamma, const BatchNormSaved<T>& saved, const Tensor<T>& gy,
                   Tensor<T>* gx, Tensor<T>* ggamma, Tensor<T>* gbeta) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t m = int64_t(N) * H * W;
#pragma omp parallel for
  for (int c = 0; c < C; ++c) {
    const double mean = saved.mean[c], invstd = saved.invstd[c];
    const double g = static_cast<double>(gamma[c]);
    double sum_gy = 0.0, sum_gy_xhat = 0.0;
    for (int n = 0; n < N; ++n)
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) {
          const double gyv = static_cast<double>(gy.at4(n, c, h, w));
          const double xhat = (static_cast<double>(x.at4(n, c, h, w)) - mean) * invstd;
          sum_gy += gyv;
          sum_gy_xhat += gyv * xhat;
        }
    if (ggamma) (*ggamma)[c] += static_cast<T>(sum_gy_xhat);
    if (gbeta) (*gbeta)[c] += static_cast<T>(sum_gy);
    if (gx) {
      if (saved.train) {
        for (int n = 0; n < N; ++n)
          for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
              const double gyv = static_cast<double>(gy.at4(n, c, h, w));
              const double xhat = (static_cast<double>(x.at4(n, c, h, w)) - mean) * invstd;
              const double dx = g * invstd * (gyv - sum_gy / double(m) - xhat * sum_gy_xhat / double(m));
              gx->at4(n, c, h, w) += static_cast<T>(dx);
            }
      } else {
        for (int n = 0; n < N; ++n)
          for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w)
              gx->at4(n, c, h, w) += static_cast<T>(g * invstd * static_cast<double>(gy.at4(n, c, h, w)));
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Linear head and softmax cross-entropy
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> linear_fwd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x.ndim() != 2 || w.ndim() != 2 || x.dim(1) != w.dim(1))
    throw ConfigError("linear expects x[N,C] and w[K,C] with matching C");
  const int N = x.dim(0), C = x.dim(1), K = w.dim(0);
  Tensor<T> y({N, K});
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k) {
      double acc = static_cast<double>(b[k]);
      for (int c = 0; c < C; ++c) acc += static_cast<double>(x.at2(n, c)) * static_cast<double>(w.at2(k, c));
      y.at2(n, k) = static_cast<T>(acc);
    }
  return y;
}

template <typename T>
void linear_bwd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy, Tensor<T>* gx, Tensor<T>* gw,
                Tensor<T>* gb) {
  const int N = x.dim(0), C = x.dim(1), K = w.dim(0);
  if (gx)
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int k = 0; k < K; ++k) acc += static_cast<double>(gy.at2(n, k)) * static_cast<double>(w.at2(k, c));
        gx->at2(n, c) += static_cast<T>(acc);
      }
  if (gw)
    for (int k = 0; k < K; ++k)
      for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int n = 0; n < N; ++n) acc += static_cast<double>(gy.at2(n, k)) * static_cast<double>(x.at2(n, c));
        gw->at2(k, c) += static_cast<T>(acc);
      }
  if (gb)
    for (int k = 0; k < K; ++k) {
      double acc = 0.0;
      for (int n = 0; n < N; ++n) acc += static_cast<double>(gy.at2(n, k));
      (*gb)[k] += static_cast<T>(acc);
    }
}

// Returns mean loss; fills probs [N,K] for the backward rule.
template <typename T>
double softmax_ce_fwd(const Tensor<T>& logits, const std::vector<int>& labels, Tensor<T>* probs) {
  const int N = logits.dim(0), K = logits.dim(1);
  if (static_cast<int>(labels.size()) != N) throw ConfigError("label count does not match batch size");
  *probs = Tensor<T>({N, K});
  double loss = 0.0;
  for (int n = 0; n < N; ++n) {
    if (labels[n] < 0 || labels[n] >= K)
      throw DataError("label " + std::to_string(labels[n]) + " out of range [0," + std::to_string(K) +
                      ") at sample " + std::to_string(n));
    double mx = static_cast<double>(logits.at2(n, 0));
    for (int k = 1; k < K; ++k) mx = std::max(mx, static_cast<double>(logits.at2(n, k)));
    double se = 0.0;
    for (int k = 0; k < K; ++k) se += std::exp(static_cast<double>(logits.at2(n, k)) - mx);
    for (int k = 0; k < K; ++k)
      probs->at2(n, k) = static_cast<T>(std::exp(static_cast<double>(logits.at2(n, k)) - mx) / se);
    loss += std::log(se) - (static_cast<double>(logits.at2(n, labels[n])) - mx);
  }
  return loss / N;
}

template <typename T>
void softmax_ce_bwd(const Tensor<T>& probs, const std::vector<int>& labels, double gscale, Tensor<T>* glogits) {
  const int N = probs.dim(0), K = probs.dim(1);
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k) {
      const double onehot = (labels[n] == k) ? 1.0 : 0.0;
      glogits->at2(n, k) += static_cast<T>(gscale * (static_cast<double>(probs.at2(n, k)) - onehot) / N);
    }
}

// ---------------------------------------------------------------------------
// Gram polynomial recurrence
// ---------------------------------------------------------------------------

// G[0..degree] from normalized input t; rc holds the degree-1 recurrence
// coefficients for degrees 2..degree.
template <typename T>
inline void gram_values(double t, const T* rc, int degree, double* G) {
  G[0] = 1.0;
  if (degree >= 1) G[1] = t;
  for (int d = 2; d <= degree; ++d) G[d] = t * G[d - 1] - static_cast<double>(rc[d - 2]) * G[d - 2];
}

// Also fills H = dG/dt.
template <typename T>
inline void gram_values_tangent(double t, const T* rc, int degree, double* G, double* H) {
  G[0] = 1.0;
  H[0] = 0.0;
  if (degree >= 1) {
    G[1] = t;
    H[1] = 1.0;
  }
  for (int d = 2; d <= degree; ++d) {
    const double b = static_cast<double>(rc[d - 2]);
    G[d] = t * G[d - 1] - b * G[d - 2];
    H[d] = G[d - 1] + t * H[d - 1] - b * H[d - 2];
  }
}

// Accumulates d(sum_d ws[d]*G_d)/d(rc_j) into grc_local[j]. G must already
// hold the forward values at t.
template <typename T>
inline void gram_rc_backprop(double t, const T* rc, int degree, const double* G, const double* ws,
                             double* grc_local) {
  for (int j = 0; j + 2 <= degree; ++j) {
    double bprev2 = 0.0;    // d(G_{j+1})/d(rc_j)
    double bprev = -G[j];   // d(G_{j+2})/d(rc_j)
    double acc = ws[j + 2] * bprev;
    for (int d = j + 3; d <= degree; ++d) {
      const double b = t * bprev - static_cast<double>(rc[d - 2]) * bprev2;
      bprev2 = bprev;
      bprev = b;
      acc += ws[d] * b;
    }
    grc_local[j] += acc;
  }
}

inline constexpr int kMaxDegree = 12;

// Stacks G_0..G_D of the (already normalized) input along a new leading axis.
template <typename T>
Tensor<T> gram_basis_fwd(const Tensor<T>& xt, const Tensor<T>& rc, int degree) {
  if (degree < 1 || degree > kMaxDegree) throw ConfigError("gram basis degree must be in [1," + std::to_string(kMaxDegree) + "]");
  if (rc.numel() != degree - 1) throw ConfigError("gram basis expects degree-1 recurrence coefficients");
  std::vector<int> out_shape{degree + 1};
  for (int d : xt.shape()) out_shape.push_back(d);
  Tensor<T> y(out_shape);
  const int64_t n = xt.numel();
  double G[kMaxDegree + 1];
  for (int64_t i = 0; i < n; ++i) {
    gram_values(static_cast<double>(xt[i]), rc.data(), degree, G);
    for (int d = 0; d <= degree; ++d) y[int64_t(d) * n + i] = static_cast<T>(G[d]);
  }
  return y;
}

template <typename T>
void gram_basis_bwd(const Tensor<T>& xt, const Tensor<T>& rc, int degree, const Tensor<T>& gy, Tensor<T>* gxt,
                    Tensor<T>* grc) {
  const int64_t n = xt.numel();
  double G[kMaxDegree + 1], H[kMaxDegree + 1], ws[kMaxDegree + 1];
  std::vector<double> grc_acc(static_cast<size_t>(std::max(0, degree - 1)), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(xt[i]);
    gram_values_tangent(t, rc.data(), degree, G, H);
    double gt = 0.0;
    for (int d = 0; d <= degree; ++d) {
      ws[d] = static_cast<double>(gy[int64_t(d) * n + i]);
      gt += ws[d] * H[d];
    }
    if (gxt) (*gxt)[i] += static_cast<T>(gt);
    if (grc && degree >= 2) gram_rc_backprop(t, rc.data(), degree, G, ws, grc_acc.data());
  }
  if (grc)
    for (int j = 0; j + 2 <= degree; ++j) (*grc)[j] += static_cast<T>(grc_acc[static_cast<size_t>(j)]);
}

// Per-channel polynomial expansion: [N,C,H,W] -> [N,C*(D+1),H,W] where output
// channel c*(D+1)+d carries G_d(tanh(x_c)). Step one of the decoupled path.
template <typename T>
Tensor<T> gram_expand_fwd(const Tensor<T>& x, const Tensor<T>& rc, int degree) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor<T> y({N, C * (degree + 1), H, W});
  const int64_t plane = int64_t(H) * W;
#pragma omp parallel for collapse(2)
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      double G[kMaxDegree + 1];
      const T* xp = x.data() + (int64_t(n) * C + c) * plane;
      for (int64_t p = 0; p < plane; ++p) {
        const double t = std::tanh(static_cast<double>(xp[p]));
        gram_values(t, rc.data(), degree, G);
        for (int d = 0; d <= degree; ++d)
          y[((int64_t(n) * C * (degree + 1)) + int64_t(c) * (degree + 1) + d) * plane + p] = static_cast<T>(G[d]);
      }
    }
  }
  return y;
}

template <typename T>
void gram_expand_bwd(const Tensor<T>& x, const Tensor<T>& rc, int degree, const Tensor<T>& gy, Tensor<T>* gx,
                     Tensor<T>* grc) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t plane = int64_t(H) * W;
  // Recurrence-coefficient gradients accumulate per sample and reduce in
  // sample order so thread count never changes the result.
  std::vector<double> slabs(static_cast<size_t>(N) * std::max(0, degree - 1), 0.0);
#pragma omp parallel for
  for (int n = 0; n < N; ++n) {
    double G[kMaxDegree + 1], H_[kMaxDegree + 1], ws[kMaxDegree + 1];
    double* slab = slabs.data() + static_cast<size_t>(n) * std::max(0, degree - 1);
    for (int c = 0; c < C; ++c) {
      const T* xp = x.data() + (int64_t(n) * C + c) * plane;
      for (int64_t p = 0; p < plane; ++p) {
        const double t = std::tanh(static_cast<double>(xp[p]));
        gram_values_tangent(t, rc.data(), degree, G, H_);
        double gt = 0.0;
        for (int d = 0; d <= degree; ++d) {
          ws[d] = static_cast<double>(gy[((int64_t(n) * C + c) * (degree + 1) + d) * plane + p]);
          gt += ws[d] * H_[d];
        }
        if (gx) gx->at4(n, c, static_cast<int>(p / W), static_cast<int>(p % W)) += static_cast<T>(gt * (1.0 - t * t));
        if (grc && degree >= 2) gram_rc_backprop(t, rc.data(), degree, G, ws, slab);
      }
    }
  }
  if (grc && degree >= 2)
    for (int n = 0; n < N; ++n)
      for (int j = 0; j + 2 <= degree; ++j)
        (*grc)[j] += static_cast<T>(slabs[static_cast<size_t>(n) * (degree - 1) + j]);
}

// ---------------------------------------------------------------------------
// KAN convolution kernels
// ---------------------------------------------------------------------------

// Geometry of one KAN convolution. In shared mode one activation per
// (cout,cin) pair serves every kernel position; in elementwise mode each of
// the k*k positions owns its activation.
struct KanGeom {
  int cin = 1;
  int cout = 1;
  int k = 1;
  int stride = 1;
  int pad = 0;
  int degree = 3;
  bool elementwise = false;

  int weight_positions() const { return elementwise ? k * k : 1; }
  int64_t poly_weight_count() const { return int64_t(cout) * cin * weight_positions() * (degree + 1); }
  int64_t residual_weight_count() const { return int64_t(cout) * cin * weight_positions(); }
};

template <typename T>
void kan_check(const Tensor<T>& x, const Tensor<T>& pw, const Tensor<T>& rw, const Tensor<T>& rc,
               const KanGeom& g) {
  if (x.ndim() != 4) throw ConfigError("kan conv input must be 4-d [N,C,H,W]");
  if (x.dim(1) != g.cin)
    throw ConfigError("kan conv channel mismatch: input C=" + std::to_string(x.dim(1)) + " vs layer Cin=" +
                      std::to_string(g.cin));
  if (pw.numel() != g.poly_weight_count()) throw ConfigError("kan conv polynomial weight tensor has wrong size");
  if (rw.numel() != g.residual_weight_count()) throw ConfigError("kan conv residual weight tensor has wrong size");
  if (rc.numel() != g.degree - 1) throw ConfigError("kan conv expects degree-1 recurrence coefficients");
  if (g.degree < 1 || g.degree > kMaxDegree) throw ConfigError("kan conv degree out of range");
  check_window(x.dim(2), g.k, g.pad, "H");
  check_window(x.dim(3), g.k, g.pad, "W");
}

// Reference path: plain serial loops, one activation evaluation per window
// cell. Padded cells contribute nothing, matching the zero padding of the
// aggregation step in the decoupled path.
template <typename T>
Tensor<T> kan_direct_fwd(const Tensor<T>& x, const Tensor<T>& pw, const Tensor<T>& rw, const Tensor<T>& rc,
                         const KanGeom& g) {
  kan_check(x, pw, rw, rc, g);
  const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
  const int Ho = conv_out_extent(H, g.k, g.stride, g.pad), Wo = conv_out_extent(W, g.k, g.stride, g.pad);
  const int wpos = g.weight_positions();
  const int D = g.degree;
  Tensor<T> y({N, g.cout, Ho, Wo});
  double G[kMaxDegree + 1];
  for (int n = 0; n < N; ++n)
    for (int co = 0; co < g.cout; ++co)
      for (int oh = 0; oh < Ho; ++oh)
        for (int ow = 0; ow < Wo; ++ow) {
          double acc = 0.0;
          for (int ci = 0; ci < g.cin; ++ci)
            for (int i = 0; i < g.k; ++i) {
              const int ih = oh * g.stride - g.pad + i;
              if (ih < 0 || ih >= H) continue;
              for (int j = 0; j < g.k; ++j) {
                const int iw = ow * g.stride - g.pad + j;
                if (iw < 0 || iw >= W) continue;
                const double u = static_cast<double>(x.at4(n, ci, ih, iw));
                const double t = std::tanh(u);
                gram_values(t, rc.data(), D, G);
                const int pos = g.elementwise ? i * g.k + j : 0;
                const T* wrow = pw.data() + (int64_t(co) * g.cin + ci) * wpos * (D + 1) + int64_t(pos) * (D + 1);
                double phi = static_cast<double>(rw[(int64_t(co) * g.cin + ci) * wpos + pos]) * silu_val(u);
                for (int d = 0; d <= D; ++d) phi += static_cast<double>(wrow[d]) * G[d];
                acc += phi;
              }
            }
          y.at4(n, co, oh, ow) = static_cast<T>(acc);
        }
  return y;
}

template <typename T>
void kan_direct_bwd(const Tensor<T>& x, const Tensor<T>& pw, const Tensor<T>& rw, const Tensor<T>& rc,
                    const KanGeom& g, const Tensor<T>& gy, Tensor<T>* gx, Tensor<T>* gpw, Tensor<T>* grw,
                    Tensor<T>* grc) {
  const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
  const int Ho = gy.dim(2), Wo = gy.dim(3);
  const int wpos = g.weight_positions();
  const int D = g.degree;
  double G[kMaxDegree + 1], Ht[kMaxDegree + 1], ws[kMaxDegree + 1];
  std::vector<double> grc_acc(static_cast<size_t>(std::max(0, D - 1)), 0.0);
  for (int n = 0; n < N; ++n)
    for (int co = 0; co < g.cout; ++co)
      for (int oh = 0; oh < Ho; ++oh)
        for (int ow = 0; ow < Wo; ++ow) {
          const double gout = static_cast<double>(gy.at4(n, co, oh, ow));
          if (gout == 0.0) continue;
          for (int ci = 0; ci < g.cin; ++ci)
            for (int i = 0; i < g.k; ++i) {
              const int ih = oh * g.stride - g.pad + i;
              if (ih < 0 || ih >= H) continue;
              for (int j = 0; j < g.k; ++j) {
                const int iw = ow * g.stride - g.pad + j;
                if (iw < 0 || iw >= W) continue;
                const double u = static_cast<double>(x.at4(n, ci, ih, iw));
                const double t = std::tanh(u);
                gram_values_tangent(t, rc.data(), D, G, Ht);
                const int pos = g.elementwise ? i * g.k + j : 0;
                const int64_t wbase = (int64_t(co) * g.cin + ci) * wpos + pos;
                const T* wrow = pw.data() + wbase * (D + 1);
                if (gpw) {
                  T* gw = gpw->data() + wbase * (D + 1);
                  for (int d = 0; d <= D; ++d) gw[d] += static_cast<T>(gout * G[d]);
                }
                if (grw) (*grw)[wbase] += static_cast<T>(gout * silu_val(u));
                if (gx) {
                  double dphi_dt = 0.0;
                  for (int d = 0; d <= D; ++d) dphi_dt += static_cast<double>(wrow[d]) * Ht[d];
                  const double du = dphi_dt * (1.0 - t * t) + static_cast<double>(rw[wbase]) * silu_grad(u);
                  gx->at4(n, ci, ih, iw) += static_cast<T>(gout * du);
                }
                if (grc && D >= 2) {
                  for (int d = 0; d <= D; ++d) ws[d] = gout * static_cast<double>(wrow[d]);
                  gram_rc_backprop(t, rc.data(), D, G, ws, grc_acc.data());
                }
              }
            }
        }
  if (grc)
    for (int j = 0; j + 2 <= D; ++j) (*grc)[j] += static_cast<T>(grc_acc[static_cast<size_t>(j)]);
}

// Production path: one pass over the input, no expanded intermediate. The
// weight tensors are transposed once per call so the channel loop vectorizes.
// Optionally emits double-precision tanh/silu maps for reuse in the backward
// pass; reading them back reproduces the inline computation bit-for-bit.
template <typename T>
Tensor<T> kan_fused_fwd(const Tensor<T>& x, const Tensor<T>& pw, const Tensor<T>& rw, const Tensor<T>& rc,
                        const KanGeom& g, Tensor<double>* tanh_map = nullptr, Tensor<double>* silu_map = nullptr) {
  kan_check(x, pw, rw, rc, g);
  const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
  const int Ho = conv_out_extent(H, g.k, g.stride, g.pad), Wo = conv_out_extent(W, g.k, g.stride, g.pad);
  const int wpos = g.weight_positions();
  const int D = g.degree;
  const int Cout = g.cout, Cin = g.cin;
  Tensor<T> y({N, Cout, Ho, Wo});

  if (tanh_map) {
    *tanh_map = Tensor<double>(x.shape());
    *silu_map = Tensor<double>(x.shape());
    const int64_t total = x.numel();
#pragma omp parallel for if (total > 4096)
    for (int64_t i = 0; i < total; ++i) {
      const double u = static_cast<double>(x[i]);
      (*tanh_map)[i] = std::tanh(u);
      (*silu_map)[i] = silu_val(u);
    }
  }

  // Transposed copies: pwt[ci][pos][d][co], rwt[ci][pos][co].
  std::vector<T> pwt(static_cast<size_t>(Cin) * wpos * (D + 1) * Cout);
  std::vector<T> rwt(static_cast<size_t>(Cin) * wpos * Cout);
  for (int co = 0; co < Cout; ++co)
    for (int ci = 0; ci < Cin; ++ci)
      for (int pos = 0; pos < wpos; ++pos) {
        for (int d = 0; d <= D; ++d)
          pwt[((size_t(ci) * wpos + pos) * (D + 1) + d) * Cout + co] =
              pw[((int64_t(co) * Cin + ci) * wpos + pos) * (D + 1) + d];
        rwt[(size_t(ci) * wpos + pos) * Cout + co] = rw[(int64_t(co) * Cin + ci) * wpos + pos];
      }

#pragma omp parallel
  {
    std::vector<double> acc(static_cast<size_t>(Cout));
    double G[kMaxDegree + 1];
#pragma omp for collapse(2)
    for (int n = 0; n < N; ++n)
      for (int oh = 0; oh < Ho; ++oh)
        for (int ow = 0; ow < Wo; ++ow) {
          std::fill(acc.begin(), acc.end(), 0.0);
          for (int ci = 0; ci < Cin; ++ci)
            for (int i = 0; i < g.k; ++i) {
              const int ih = oh * g.stride - g.pad + i;
              if (ih < 0 || ih >= H) continue;
              for (int j = 0; j < g.k; ++j) {
                const int iw = ow * g.stride - g.pad + j;
                if (iw < 0 || iw >= W) continue;
                double t, s;
                if (tanh_map) {
                  t = tanh_map->at4(n, ci, ih, iw);
                  s = silu_map->at4(n, ci, ih, iw);
                } else {
                  const double u = static_cast<double>(x.at4(n, ci, ih, iw));
                  t = std::tanh(u);
                  s = silu_val(u);
                }
                gram_values(t, rc.data(), D, G);
                const int pos = g.elementwise ? i * g.k + j : 0;
                const T* wt = pwt.data() + (size_t(ci) * wpos + pos) * (D + 1) * Cout;
                for (int d = 0; d <= D; ++d) {
                  const double gd = G[d];
                  const T* row = wt + size_t(d) * Cout;
                  for (int co = 0; co < Cout; ++co) acc[static_cast<size_t>(co)] += gd * static_cast<double>(row[co]);
                }
                const T* rt = rwt.data() + (size_t(ci) * wpos + pos) * Cout;
                for (int co = 0; co < Cout; ++co) acc[static_cast<size_t>(co)] += s * static_cast<double>(rt[co]);
              }
            }
          for (int co = 0; co < Cout; ++co) y.at4(n, co, oh, ow) = static_cast<T>(acc[static_cast<size_t>(co)]);
        }
  }
  return y;
}

// Scratch bytes the fused forward allocates beyond input, weights and output.
inline int64_t kan_fused_transient_bytes(const KanGeom& g, int threads, size_t scalar_size) {
  const int64_t wt = (g.poly_weight_count() + g.residual_weight_count()) * static_cast<int64_t>(scalar_size);
  const int64_t acc = int64_t(threads) * g.cout * static_cast<int64_t>(sizeof(double));
  return wt + acc;
}

template <typename T>
void kan_fused_bwd(const Tensor<T>& x, const Tensor<T>& pw, const Tensor<T>& rw, const Tensor<T>& rc,
                   const KanGeom& g, const Tensor<T>& gy, Tensor<T>* gx, Tensor<T>* gpw, Tensor<T>* grw,
                   Tensor<T>* grc, const Tensor<double>* tanh_map = nullptr,
                   const Tensor<double>* silu_map = nullptr) {
  const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
  const int Ho = gy.dim(2), Wo = gy.dim(3);
  const int wpos = g.weight_positions();
  const int D = g.degree;
  const int Cout = g.cout, Cin = g.cin;

  // Transposed weights, as in the forward pass.
  std::vector<T> pwt(static_cast<size_t>(Cin) * wpos * (D + 1) * Cout);
  std::vector<T> rwt(static_cast<size_t>(Cin) * wpos * Cout);
  for (int co = 0; co < Cout; ++co)
    for (int ci = 0; ci < Cin; ++ci)
      for (int pos = 0; pos < wpos; ++pos) {
        for (int d = 0; d <= D; ++d)
          pwt[((size_t(ci) * wpos + pos) * (D + 1) + d) * Cout + co] =
              pw[((int64_t(co) * Cin + ci) * wpos + pos) * (D + 1) + d];
        rwt[(size_t(ci) * wpos + pos) * Cout + co] = rw[(int64_t(co) * Cin + ci) * wpos + pos];
      }

  // Input gradients: one owner per input element, windows gathered.
  if (gx) {
#pragma omp parallel for collapse(2)
    for (int n = 0; n < N; ++n)
      for (int ci = 0; ci < Cin; ++ci) {
        double G[kMaxDegree + 1], Ht[kMaxDegree + 1], wsum[kMaxDegree + 1];
        for (int ih = 0; ih < H; ++ih)
          for (int iw = 0; iw < W; ++iw) {
            const double u = static_cast<double>(x.at4(n, ci, ih, iw));
            const double t = tanh_map ? tanh_map->at4(n, ci, ih, iw) : std::tanh(u);
            gram_values_tangent(t, rc.data(), D, G, Ht);
            for (int d = 0; d <= D; ++d) wsum[d] = 0.0;
            double rsum = 0.0;
            for (int i = 0; i < g.k; ++i) {
              const int num_h = ih + g.pad - i;
              if (num_h < 0 || num_h % g.stride) continue;
              const int oh = num_h / g.stride;
              if (oh >= Ho) continue;
              for (int j = 0; j < g.k; ++j) {
                const int num_w = iw + g.pad - j;
                if (num_w < 0 || num_w % g.stride) continue;
                const int ow = num_w / g.stride;
                if (ow >= Wo) continue;
                const int pos = g.elementwise ? i * g.k + j : 0;
                const T* wt = pwt.data() + (size_t(ci) * wpos + pos) * (D + 1) * Cout;
                const T* rt = rwt.data() + (size_t(ci) * wpos + pos) * Cout;
                const T* gyrow = gy.data() + ((int64_t(n) * Cout) * Ho + oh) * Wo + ow;
                const int64_t gystride = int64_t(Ho) * Wo;
                for (int d = 0; d <= D; ++d) {
                  const T* row = wt + size_t(d) * Cout;
                  double acc = 0.0;
                  for (int co = 0; co < Cout; ++co)
                    acc += static_cast<double>(gyrow[int64_t(co) * gystride]) * static_cast<double>(row[co]);
                  wsum[d] += acc;
                }
                double racc = 0.0;
                for (int co = 0; co < Cout; ++co)
                  racc += static_cast<double>(gyrow[int64_t(co) * gystride]) * static_cast<double>(rt[co]);
                rsum += racc;
              }
            }
            double dt = 0.0;
            for (int d = 0; d <= D; ++d) dt += wsum[d] * Ht[d];
            gx->at4(n, ci, ih, iw) += static_cast<T>(dt * (1.0 - t * t) + rsum * silu_grad(u));
          }
      }
  }

  // Weight and recurrence gradients: per-sample slabs, reduced in sample
  // order.
  if (gpw || grw || grc) {
    const size_t pw_slab = static_cast<size_t>(Cin) * wpos * (D + 1) * Cout;
    const size_t rw_slab = static_cast<size_t>(Cin) * wpos * Cout;
    const size_t rc_slab = static_cast<size_t>(std::max(0, D - 1));
    std::vector<double> pws(gpw ? pw_slab * N : 0, 0.0);
    std::vector<double> rws(grw ? rw_slab * N : 0, 0.0);
    std::vector<double> rcs(grc ? rc_slab * N : 0, 0.0);
#pragma omp parallel for
    for (int n = 0; n < N; ++n) {
      double G[kMaxDegree + 1], ws[kMaxDegree + 1];
      double* pslab = gpw ? pws.data() + pw_slab * n : nullptr;
      double* rslab = grw ? rws.data() + rw_slab * n : nullptr;
      double* cslab = grc ? rcs.data() + rc_slab * n : nullptr;
      for (int oh = 0; oh < Ho; ++oh)
        for (int ow = 0; ow < Wo; ++ow) {
          const T* gyrow = gy.data() + ((int64_t(n) * Cout) * Ho + oh) * Wo + ow;
          const int64_t gystride = int64_t(Ho) * Wo;
          for (int ci = 0; ci < Cin; ++ci)
            for (int i = 0; i < g.k; ++i) {
              const int ih = oh * g.stride - g.pad + i;
              if (ih < 0 || ih >= H) continue;
              for (int j = 0; j < g.k; ++j) {
                const int iw = ow * g.stride - g.pad + j;
                if (iw < 0 || iw >= W) continue;
                double t, s;
                if (tanh_map) {
                  t = tanh_map->at4(n, ci, ih, iw);
                  s = silu_map->at4(n, ci, ih, iw);
                } else {
                  const double u = static_cast<double>(x.at4(n, ci, ih, iw));
                  t = std::tanh(u);
                  s = silu_val(u);
                }
                gram_values(t, rc.data(), D, G);
                const int pos = g.elementwise ? i * g.k + j : 0;
                if (pslab) {
                  double* slot = pslab + (size_t(ci) * wpos + pos) * (D + 1) * Cout;
                  for (int d = 0; d <= D; ++d) {
                    const double gd = G[d];
                    double* row = slot + size_t(d) * Cout;
                    for (int co = 0; co < Cout; ++co)
                      row[co] += gd * static_cast<double>(gyrow[int64_t(co) * gystride]);
                  }
                }
                if (rslab) {
                  double* row = rslab + (size_t(ci) * wpos + pos) * Cout;
                  for (int co = 0; co < Cout; ++co) row[co] += s * static_cast<double>(gyrow[int64_t(co) * gystride]);
                }
                if (cslab && D >= 2) {
                  const T* wt = pwt.data() + (size_t(ci) * wpos + pos) * (D + 1) * Cout;
                  for (int d = 0; d <= D; ++d) {
                    const T* row = wt + size_t(d) * Cout;
                    double acc = 0.0;
                    for (int co = 0; co < Cout; ++co)
                      acc += static_cast<double>(gyrow[int64_t(co) * gystride]) * static_cast<double>(row[co]);
                    ws[d] = acc;
                  }
                  gram_rc_backprop(t, rc.data(), D, G, ws, cslab);
                }
              }
            }
        }
    }
    for (int n = 0; n < N; ++n) {
      if (gpw) {
        const double* pslab = pws.data() + pw_slab * n;
        for (int co = 0; co < Cout; ++co)
          for (int ci = 0; ci < Cin; ++ci)
            for (int pos = 0; pos < wpos; ++pos)
              for (int d = 0; d <= D; ++d)
                (*gpw)[((int64_t(co) * Cin + ci) * wpos + pos) * (D + 1) + d] +=
                    static_cast<T>(pslab[((size_t(ci) * wpos + pos) * (D + 1) + d) * Cout + co]);
      }
      if (grw) {
        const double* rslab = rws.data() + rw_slab * n;
        for (int co = 0; co < Cout; ++co)
          for (int ci = 0; ci < Cin; ++ci)
            for (int pos = 0; pos < wpos; ++pos)
              (*grw)[(int64_t(co) * Cin + ci) * wpos + pos] +=
                  static_cast<T>(rslab[(size_t(ci) * wpos + pos) * Cout + co]);
      }
      if (grc) {
        const double* cslab = rcs.data() + rc_slab * n;
        for (size_t j = 0; j < rc_slab; ++j) (*grc)[static_cast<int64_t>(j)] += static_cast<T>(cslab[j]);
      }
    }
  }
}

}  // namespace reskan::kernels
