#pragma once

// The primitive catalog. Each op wraps a kernel with its backward rule.
// Elementwise binaries broadcast only scalar-with-tensor.

#include <memory>
#include <vector>

#include "reskan/autograd.hpp"
#include "reskan/kernels.hpp"
#include "reskan/rng.hpp"

namespace reskan::ag {

template <typename T>
void check_binary_shapes(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (!a.same_shape(b) && !a.is_scalar() && !b.is_scalar())
    throw ConfigError(std::string(op) + ": incompatible shapes " + Tensor<T>::shape_str(a.shape()) + " vs " +
                      Tensor<T>::shape_str(b.shape()));
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  const Tensor<T>&av = a.value(), &bv = b.value();
  check_binary_shapes(av, bv, "add");
  const bool as = av.is_scalar() && !bv.is_scalar(), bs = bv.is_scalar() && !av.is_scalar();
  Tensor<T> out(as ? bv.shape() : av.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = (as ? av[0] : av[i]) + (bs ? bv[0] : bv[i]);
  return Var<T>::make_op("add", std::move(out), {a, b}, [as, bs](Node<T>& n) {
    auto &na = *n.inputs[0], &nb = *n.inputs[1];
    if (na.requires_grad) {
      Tensor<T>& g = na.ensure_grad();
      if (as) {
        double acc = 0.0;
        for (int64_t i = 0; i < n.grad.numel(); ++i) acc += static_cast<double>(n.grad[i]);
        g[0] += static_cast<T>(acc);
      } else {
        g.add_(n.grad);
      }
    }
    if (nb.requires_grad) {
      Tensor<T>& g = nb.ensure_grad();
      if (bs) {
        double acc = 0.0;
        for (int64_t i = 0; i < n.grad.numel(); ++i) acc += static_cast<double>(n.grad[i]);
        g[0] += static_cast<T>(acc);
      } else {
        g.add_(n.grad);
      }
    }
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  const Tensor<T>&av = a.value(), &bv = b.value();
  check_binary_shapes(av, bv, "mul");
  const bool as = av.is_scalar() && !bv.is_scalar(), bs = bv.is_scalar() && !av.is_scalar();
  Tensor<T> out(as ? bv.shape() : av.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = (as ? av[0] : av[i]) * (bs ? bv[0] : bv[i]);
  return Var<T>::make_op("mul", std::move(out), {a, b}, [as, bs, av, bv](Node<T>& n) {
    auto &na = *n.inputs[0], &nb = *n.inputs[1];
    if (na.requires_grad) {
      Tensor<T>& g = na.ensure_grad();
      if (as) {
        double acc = 0.0;
        for (int64_t i = 0; i < n.grad.numel(); ++i) acc += static_cast<double>(n.grad[i]) * static_cast<double>(bv[i]);
        g[0] += static_cast<T>(acc);
      } else {
        for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * (bs ? bv[0] : bv[i]);
      }
    }
    if (nb.requires_grad) {
      Tensor<T>& g = nb.ensure_grad();
      if (bs) {
        double acc = 0.0;
        for (int64_t i = 0; i < n.grad.numel(); ++i) acc += static_cast<double>(n.grad[i]) * static_cast<double>(av[i]);
        g[0] += static_cast<T>(acc);
      } else {
        for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * (as ? av[0] : av[i]);
      }
    }
  });
}

template <typename T>
Var<T> neg(const Var<T>& a) {
  Tensor<T> out(a.value().shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = -a.value()[i];
  return Var<T>::make_op("neg", std::move(out), {a}, [](Node<T>& n) {
    auto& na = *n.inputs[0];
    if (!na.requires_grad) return;
    Tensor<T>& g = na.ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] -= n.grad[i];
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  return add(a, neg(b));
}

// Multiply by a non-learnable constant.
template <typename T>
Var<T> scale(const Var<T>& a, double c) {
  Tensor<T> out(a.value().shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = static_cast<T>(static_cast<double>(a.value()[i]) * c);
  return Var<T>::make_op("scale", std::move(out), {a}, [c](Node<T>& n) {
    auto& na = *n.inputs[0];
    if (!na.requires_grad) return;
    Tensor<T>& g = na.ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += static_cast<T>(static_cast<double>(n.grad[i]) * c);
  });
}

template <typename T>
Var<T> tanh_op(const Var<T>& a) {
  Tensor<T> out = kernels::unary_tanh(a.value());
  Tensor<T> saved = out;
  return Var<T>::make_op("tanh", std::move(out), {a}, [saved](Node<T>& n) {
    auto& na = *n.inputs[0];
    if (!na.requires_grad) return;
    Tensor<T>& g = na.ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) {
      const double t = static_cast<double>(saved[i]);
      g[i] += static_cast<T>(static_cast<double>(n.grad[i]) * (1.0 - t * t));
    }
  });
}

template <typename T>
Var<T> silu(const Var<T>& a) {
  Tensor<T> out = kernels::unary_silu(a.value());
  Tensor<T> x = a.value();
  return Var<T>::make_op("silu", std::move(out), {a}, [x](Node<T>& n) {
    auto& na = *n.inputs[0];
    if (!na.requires_grad) return;
    Tensor<T>& g = na.ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i)
      g[i] += static_cast<T>(static_cast<double>(n.grad[i]) * kernels::silu_grad(static_cast<double>(x[i])));
  });
}

template <typename T>
Var<T> reshape(const Var<T>& a, std::vector<int> shape) {
  if (Tensor<T>::numel_of(shape) != a.value().numel())
    throw ConfigError("reshape cannot change element count: " + Tensor<T>::shape_str(a.value().shape()) + " -> " +
                      Tensor<T>::shape_str(shape));
  std::vector<int> in_shape = a.value().shape();
  Tensor<T> out(shape, a.value().vec());
  return Var<T>::make_op("reshape", std::move(out), {a}, [in_shape](Node<T>& n) {
    auto& na = *n.inputs[0];
    if (!na.requires_grad) return;
    Tensor<T>& g = na.ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
  });
}

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, int stride, int pad) {
  Tensor<T> out = kernels::conv2d_fwd(x.value(), w.value(), stride, pad);
  Tensor<T> xv = x.value(), wv = w.value();
  return Var<T>::make_op("conv2d", std::move(out), {x, w}, [xv, wv, stride, pad](Node<T>& n) {
    auto &nx = *n.inputs[0], &nw = *n.inputs[1];
    Tensor<T>* gx = nx.requires_grad ? &nx.ensure_grad() : nullptr;
    Tensor<T>* gw = nw.requires_grad ? &nw.ensure_grad() : nullptr;
    kernels::conv2d_bwd(xv, wv, stride, pad, n.grad, gx, gw);
  });
}

template <typename T>
Var<T> box_sum2d(const Var<T>& x, int k, int stride, int pad) {
  Tensor<T> out = kernels::box_sum_fwd(x.value(), k, stride, pad);
  Tensor<T> xv = x.value();
  return Var<T>::make_op("box_sum2d", std::move(out), {x}, [xv, k, stride, pad](Node<T>& n) {
    auto& nx = *n.inputs[0];
    if (!nx.requires_grad) return;
    kernels::box_sum_bwd(xv, k, stride, pad, n.grad, &nx.ensure_grad());
  });
}

template <typename T>
Var<T> maxpool2d(const Var<T>& x, int k, int stride, int pad = 0) {
  auto argmax = std::make_shared<std::vector<int64_t>>();
  Tensor<T> out = kernels::maxpool_fwd(x.value(), k, stride, pad, argmax.get());
  return Var<T>::make_op("maxpool2d", std::move(out), {x}, [argmax](Node<T>& n) {
    auto& nx = *n.inputs[0];
    if (!nx.requires_grad) return;
    kernels::maxpool_bwd(*argmax, n.grad, &nx.ensure_grad());
  });
}

template <typename T>
Var<T> avgpool2d(const Var<T>& x, int k, int stride, int pad = 0) {
  Tensor<T> out = kernels::avgpool_fwd(x.value(), k, stride, pad);
  Tensor<T> xv = x.value();
  return Var<T>::make_op("avgpool2d", std::move(out), {x}, [xv, k, stride, pad](Node<T>& n) {
    auto& nx = *n.inputs[0];
    if (!nx.requires_grad) return;
    kernels::avgpool_bwd(xv, k, stride, pad, n.grad, &nx.ensure_grad());
  });
}

template <typename T>
Var<T> global_avgpool(const Var<T>& x) {
  Tensor<T> out = kernels::global_avgpool_fwd(x.value());
  std::vector<int> in_shape = x.value().shape();
  return Var<T>::make_op("global_avgpool", std::move(out), {x}, [in_shape](Node<T>& n) {
    auto& nx = *n.inputs[0];
    if (!nx.requires_grad) return;
    kernels::global_avgpool_bwd(in_shape, n.grad, &nx.ensure_grad());
  });
}

template <typename T>
struct BatchNormState {
  Tensor<T> running_mean;
  Tensor<T> running_var;
  explicit BatchNormState(int channels)
      : running_mean(Tensor<T>::zeros({channels})), running_var(Tensor<T>::ones({channels})) {}
};

template <typename T>
Var<T> batch_norm2d(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, BatchNormState<T>& state, bool train,
                    double eps = 1e-5, double momentum = 0.1) {
  auto saved = std::make_shared<kernels::BatchNormSaved<T>>();
  Tensor<T> out = kernels::batchnorm_fwd(x.value(), gamma.value(), beta.value(), state.running_mean,
                                         state.running_var, train, eps, momentum, saved.get());
  Tensor<T> xv = x.value(), gv = gamma.value();
  return Var<T>::make_op("batch_norm2d", std::move(out), {x, gamma, beta}, [xv, gv, saved](Node<T>& n) {
    auto &nx = *n.inputs[0], &ng = *n.inputs[1], &nb = *n.inputs[2];
    Tensor<T>* gx = nx.requires_grad ? &nx.ensure_grad() : nullptr;
    Tensor<T>* gg = ng.requires_grad ? &ng.ensure_grad() : nullptr;
    Tensor<T>* gb = nb.requires_grad ? &nb.ensure_grad() : nullptr;
    kernels::batchnorm_bwd(xv, gv, *saved, n.grad, gx, gg, gb);
  });
}

// Train mode zeroes each element with probability `rate` and scales survivors
// by 1/(1-rate); eval mode is the identity (the input Var is returned as-is).
template <typename T>
Var<T> dropout(const Var<T>& x, double rate, bool train, RngStream& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must be in [0,1), got " + std::to_string(rate));
  if (!train) return x;
  Tensor<T> mask(x.value().shape());
  const T keep = static_cast<T>(1.0 / (1.0 - rate));
  for (int64_t i = 0; i < mask.numel(); ++i) mask[i] = (rng.uniform() < rate) ? T(0) : keep;
  Tensor<T> out(x.value().shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = x.value()[i] * mask[i];
  return Var<T>::make_op("dropout", std::move(out), {x}, [mask](Node<T>& n) {
    auto& nx = *n.inputs[0];
    if (!nx.requires_grad) return;
    Tensor<T>& g = nx.ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * mask[i];
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  Tensor<T> out = kernels::linear_fwd(x.value(), w.value(), b.value());
  Tensor<T> xv = x.value(), wv = w.value();
  return Var<T>::make_op("linear", std::move(out), {x, w, b}, [xv, wv](Node<T>& n) {
    auto &nx = *n.inputs[0], &nw = *n.inputs[1], &nb = *n.inputs[2];
    Tensor<T>* gx = nx.requires_grad ? &nx.ensure_grad() : nullptr;
    Tensor<T>* gw = nw.requires_grad ? &nw.ensure_grad() : nullptr;
    Tensor<T>* gb = nb.requires_grad ? &nb.ensure_grad() : nullptr;
    kernels::linear_bwd(xv, wv, n.grad, gx, gw, gb);
  });
}

// Mean over the batch of -log softmax(logits)[label].
template <typename T>
Var<T> softmax_cross_entropy(const Var<T>& logits, const std::vector<int>& labels) {
  auto probs = std::make_shared<Tensor<T>>();
  const double loss = kernels::softmax_ce_fwd(logits.value(), labels, probs.get());
  return Var<T>::make_op("softmax_cross_entropy", Tensor<T>::scalar(static_cast<T>(loss)), {logits},
                         [probs, labels](Node<T>& n) {
                           auto& nl = *n.inputs[0];
                           if (!nl.requires_grad) return;
                           kernels::softmax_ce_bwd(*probs, labels, static_cast<double>(n.grad[0]),
                                                   &nl.ensure_grad());
                         });
}

template <typename T>
Var<T> sum_all(const Var<T>& a) {
  double acc = 0.0;
  for (int64_t i = 0; i < a.value().numel(); ++i) acc += static_cast<double>(a.value()[i]);
  return Var<T>::make_op("sum_all", Tensor<T>::scalar(static_cast<T>(acc)), {a}, [](Node<T>& n) {
    auto& na = *n.inputs[0];
    if (!na.requires_grad) return;
    Tensor<T>& g = na.ensure_grad();
    for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[0];
  });
}

// Stacks G_0..G_D of the already-normalized input along a new leading axis.
template <typename T>
Var<T> gram_basis(const Var<T>& xt, const Var<T>& rc, int degree) {
  Tensor<T> out = kernels::gram_basis_fwd(xt.value(), rc.value(), degree);
  Tensor<T> xv = xt.value(), rv = rc.value();
  return Var<T>::make_op("gram_basis", std::move(out), {xt, rc}, [xv, rv, degree](Node<T>& n) {
    auto &nx = *n.inputs[0], &nr = *n.inputs[1];
    Tensor<T>* gx = nx.requires_grad ? &nx.ensure_grad() : nullptr;
    Tensor<T>* gr = nr.requires_grad ? &nr.ensure_grad() : nullptr;
    kernels::gram_basis_bwd(xv, rv, degree, n.grad, gx, gr);
  });
}

// out[...] = sum_d weights[d] * stack[d,...]
template <typename T>
Var<T> axis0_contract(const Var<T>& stack, const Var<T>& weights) {
  const int D1 = stack.value().dim(0);
  if (weights.value().numel() != D1) throw ConfigError("axis0_contract weight length must match leading axis");
  std::vector<int> out_shape(stack.value().shape().begin() + 1, stack.value().shape().end());
  const int64_t inner = Tensor<T>::numel_of(out_shape);
  Tensor<T> out(out_shape);
  for (int64_t i = 0; i < inner; ++i) {
    double acc = 0.0;
    for (int d = 0; d < D1; ++d)
      acc += static_cast<double>(weights.value()[d]) * static_cast<double>(stack.value()[int64_t(d) * inner + i]);
    out[i] = static_cast<T>(acc);
  }
  Tensor<T> sv = stack.value(), wv = weights.value();
  return Var<T>::make_op("axis0_contract", std::move(out), {stack, weights}, [sv, wv, D1, inner](Node<T>& n) {
    auto &ns = *n.inputs[0], &nw = *n.inputs[1];
    if (ns.requires_grad) {
      Tensor<T>& g = ns.ensure_grad();
      for (int d = 0; d < D1; ++d)
        for (int64_t i = 0; i < inner; ++i) g[int64_t(d) * inner + i] += static_cast<T>(wv[d] * n.grad[i]);
    }
    if (nw.requires_grad) {
      Tensor<T>& g = nw.ensure_grad();
      for (int d = 0; d < D1; ++d) {
        double acc = 0.0;
        for (int64_t i = 0; i < inner; ++i)
          acc += static_cast<double>(sv[int64_t(d) * inner + i]) * static_cast<double>(n.grad[i]);
        g[d] += static_cast<T>(acc);
      }
    }
  });
}

// Per-channel basis expansion of tanh(x); step one of the decoupled path.
template <typename T>
Var<T> gram_expand(const Var<T>& x, const Var<T>& rc, int degree) {
  Tensor<T> out = kernels::gram_expand_fwd(x.value(), rc.value(), degree);
  Tensor<T> xv = x.value(), rv = rc.value();
  return Var<T>::make_op("gram_expand", std::move(out), {x, rc}, [xv, rv, degree](Node<T>& n) {
    auto &nx = *n.inputs[0], &nr = *n.inputs[1];
    Tensor<T>* gx = nx.requires_grad ? &nx.ensure_grad() : nullptr;
    Tensor<T>* gr = nr.requires_grad ? &nr.ensure_grad() : nullptr;
    kernels::gram_expand_bwd(xv, rv, degree, n.grad, gx, gr);
  });
}

}  // namespace reskan::ag
