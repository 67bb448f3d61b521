#pragma once

// Gram-polynomial KAN convolutions. A layer's learnable state is a
// polynomial-weight tensor (one weight vector per activation), a residual
// weight per activation and one set of recurrence coefficients shared by the
// whole layer. Shared mode keys activations by (cout,cin); elementwise mode
// keys them by (cout,cin,position).
//
// Three numerically equivalent execution paths exist for shared mode:
//   direct    - serial reference, one activation evaluation per window cell
//   decoupled - basis expansion, learnable 1x1 projection, fixed all-ones
//               aggregation (materializes the expanded intermediate)
//   fused     - single pass without the expanded intermediate (OpenMP)

#include <string>

#include "reskan/autograd.hpp"
#include "reskan/kernels.hpp"
#include "reskan/ops.hpp"
#include "reskan/rng.hpp"

namespace reskan {

using kernels::KanGeom;

enum class KanPath { direct, decoupled, fused };

inline const char* kan_path_name(KanPath p) {
  switch (p) {
    case KanPath::direct: return "direct";
    case KanPath::decoupled: return "decoupled";
    case KanPath::fused: return "fused";
  }
  return "?";
}

template <typename T>
struct KanConvWeights {
  Tensor<T> poly;        // shared [Cout,Cin,D+1], elementwise [Cout,Cin,k*k,D+1]
  Tensor<T> residual;    // shared [Cout,Cin], elementwise [Cout,Cin,k*k]
  Tensor<T> recurrence;  // [D-1]
};

template <typename T>
std::vector<int> kan_poly_shape(const KanGeom& g) {
  if (g.elementwise) return {g.cout, g.cin, g.k * g.k, g.degree + 1};
  return {g.cout, g.cin, g.degree + 1};
}

template <typename T>
std::vector<int> kan_residual_shape(const KanGeom& g) {
  if (g.elementwise) return {g.cout, g.cin, g.k * g.k};
  return {g.cout, g.cin};
}

// Kaiming-uniform (linear gain) fill: U(-sqrt(3/fan_in), +sqrt(3/fan_in)).
template <typename T>
void kaiming_uniform_fill(Tensor<T>& t, int64_t fan_in, RngStream& rng) {
  const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(rng.uniform(-bound, bound));
}

// Standard deviation of the recurrence-coefficient initializer,
// 1 / (k^d * Cin * (D+1)) with spatial dimension d = 2.
inline double recurrence_init_sigma(const KanGeom& g) {
  return 1.0 / (static_cast<double>(g.k) * g.k * g.cin * (g.degree + 1));
}

// Initialization is a pure function of (seed, label, shapes).
template <typename T>
KanConvWeights<T> init_kan_conv(const KanGeom& g, uint64_t seed, const std::string& label = "kan") {
  KanConvWeights<T> w{Tensor<T>(kan_poly_shape<T>(g)), Tensor<T>(kan_residual_shape<T>(g)),
                      Tensor<T>({g.degree - 1})};
  {
    RngStream rng = RngStream::labeled(seed, label + ".poly");
    kaiming_uniform_fill(w.poly, int64_t(g.cin) * g.weight_positions() * (g.degree + 1), rng);
  }
  {
    RngStream rng = RngStream::labeled(seed, label + ".residual");
    kaiming_uniform_fill(w.residual, int64_t(g.cin) * g.weight_positions(), rng);
  }
  {
    RngStream rng = RngStream::labeled(seed, label + ".recurrence");
    const double sigma = recurrence_init_sigma(g);
    for (int64_t i = 0; i < w.recurrence.numel(); ++i) w.recurrence[i] = static_cast<T>(sigma * rng.normal());
  }
  return w;
}

namespace ag {

// Phi(x) = sum_d w[d] * G_d(tanh(x)) + wm * SiLU(x), elementwise over x.
template <typename T>
Var<T> gram_activation(const Var<T>& x, const Var<T>& w, const Var<T>& wm, const Var<T>& rc, int degree) {
  Var<T> basis = gram_basis(tanh_op(x), rc, degree);
  Var<T> poly = axis0_contract(basis, w);
  return add(poly, mul(wm, silu(x)));
}

// Reference path; works in both sharing modes.
template <typename T>
Var<T> kan_conv_direct(const Var<T>& x, const Var<T>& pw, const Var<T>& rw, const Var<T>& rc, const KanGeom& g) {
  Tensor<T> out = kernels::kan_direct_fwd(x.value(), pw.value(), rw.value(), rc.value(), g);
  Tensor<T> xv = x.value(), pv = pw.value(), rv = rw.value(), cv = rc.value();
  return Var<T>::make_op("kan_conv_direct", std::move(out), {x, pw, rw, rc}, [xv, pv, rv, cv, g](Node<T>& n) {
    auto &nx = *n.inputs[0], &np = *n.inputs[1], &nr = *n.inputs[2], &nc = *n.inputs[3];
    kernels::kan_direct_bwd(xv, pv, rv, cv, g, n.grad, nx.requires_grad ? &nx.ensure_grad() : nullptr,
                            np.requires_grad ? &np.ensure_grad() : nullptr,
                            nr.requires_grad ? &nr.ensure_grad() : nullptr,
                            nc.requires_grad ? &nc.ensure_grad() : nullptr);
  });
}

// Production kernel behind the fused path; handles both sharing modes.
template <typename T>
Var<T> kan_conv_omp(const Var<T>& x, const Var<T>& pw, const Var<T>& rw, const Var<T>& rc, const KanGeom& g,
                    bool save_maps = true) {
  auto tmap = std::make_shared<Tensor<double>>();
  auto smap = std::make_shared<Tensor<double>>();
  Tensor<T> out = kernels::kan_fused_fwd(x.value(), pw.value(), rw.value(), rc.value(), g,
                                         save_maps ? tmap.get() : nullptr, save_maps ? smap.get() : nullptr);
  Tensor<T> xv = x.value(), pv = pw.value(), rv = rw.value(), cv = rc.value();
  return Var<T>::make_op("kan_conv_fused", std::move(out), {x, pw, rw, rc},
                         [xv, pv, rv, cv, g, tmap, smap, save_maps](Node<T>& n) {
                           auto &nx = *n.inputs[0], &np = *n.inputs[1], &nr = *n.inputs[2], &nc = *n.inputs[3];
                           kernels::kan_fused_bwd(xv, pv, rv, cv, g, n.grad,
                                                  nx.requires_grad ? &nx.ensure_grad() : nullptr,
                                                  np.requires_grad ? &np.ensure_grad() : nullptr,
                                                  nr.requires_grad ? &nr.ensure_grad() : nullptr,
                                                  nc.requires_grad ? &nc.ensure_grad() : nullptr,
                                                  save_maps ? tmap.get() : nullptr,
                                                  save_maps ? smap.get() : nullptr);
                         });
}

template <typename T>
Var<T> kan_conv_fused(const Var<T>& x, const Var<T>& pw, const Var<T>& rw, const Var<T>& rc, const KanGeom& g) {
  if (g.elementwise) throw ConfigError("kan_conv_fused requires shared mode");
  return kan_conv_omp(x, pw, rw, rc, g);
}

// Expansion, learnable pointwise projection, fixed all-ones aggregation, plus
// the residual branch aggregated with the same all-ones kernel.
template <typename T>
Var<T> kan_conv_decoupled(const Var<T>& x, const Var<T>& pw, const Var<T>& rw, const Var<T>& rc, const KanGeom& g) {
  if (g.elementwise) throw ConfigError("kan_conv_decoupled requires shared mode");
  Var<T> expanded = gram_expand(x, rc, g.degree);
  Var<T> poly_kernel = reshape(pw, {g.cout, g.cin * (g.degree + 1), 1, 1});
  Var<T> poly_pointwise = conv2d(expanded, poly_kernel, 1, 0);
  Var<T> residual_kernel = reshape(rw, {g.cout, g.cin, 1, 1});
  Var<T> residual_pointwise = conv2d(silu(x), residual_kernel, 1, 0);
  Var<T> poly_agg = box_sum2d(poly_pointwise, g.k, g.stride, g.pad);
  Var<T> residual_agg = box_sum2d(residual_pointwise, g.k, g.stride, g.pad);
  return add(poly_agg, residual_agg);
}

template <typename T>
Var<T> kan_conv_path(const Var<T>& x, const Var<T>& pw, const Var<T>& rw, const Var<T>& rc, const KanGeom& g,
                     KanPath path) {
  switch (path) {
    case KanPath::direct: return kan_conv_direct(x, pw, rw, rc, g);
    case KanPath::decoupled: return kan_conv_decoupled(x, pw, rw, rc, g);
    case KanPath::fused: return kan_conv_fused(x, pw, rw, rc, g);
  }
  throw UsageError("unknown kan path");
}

}  // namespace ag
}  // namespace reskan
