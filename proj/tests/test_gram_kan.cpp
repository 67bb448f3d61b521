#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "reference_kernels.hpp"
#include "reskan/kan.hpp"

using namespace reskan;
using ag::Var;

namespace {

KanGeom shared_geom(int cin, int cout, int k, int stride, int pad, int degree) {
  KanGeom g;
  g.cin = cin;
  g.cout = cout;
  g.k = k;
  g.stride = stride;
  g.pad = pad;
  g.degree = degree;
  g.elementwise = false;
  return g;
}

// Replicates shared weights across every kernel position.
template <typename T>
KanConvWeights<T> replicate_to_elementwise(const KanConvWeights<T>& shared, const KanGeom& g) {
  KanGeom ge = g;
  ge.elementwise = true;
  KanConvWeights<T> out{Tensor<T>(kan_poly_shape<T>(ge)), Tensor<T>(kan_residual_shape<T>(ge)), shared.recurrence};
  const int kk = g.k * g.k, D1 = g.degree + 1;
  for (int co = 0; co < g.cout; ++co)
    for (int ci = 0; ci < g.cin; ++ci)
      for (int pos = 0; pos < kk; ++pos) {
        for (int d = 0; d < D1; ++d)
          out.poly[((int64_t(co) * g.cin + ci) * kk + pos) * D1 + d] = shared.poly[(int64_t(co) * g.cin + ci) * D1 + d];
        out.residual[(int64_t(co) * g.cin + ci) * kk + pos] = shared.residual[int64_t(co) * g.cin + ci];
      }
  return out;
}

}  // namespace

TEST_CASE("gram_basis: zero recurrence coefficients give monomials") {
  auto xt = Tensor<double>::scalar(0.5);
  auto rc = Tensor<double>::zeros({2});
  auto b = kernels::gram_basis_fwd(xt, rc, 3);
  CHECK(b[0] == 1.0);
  CHECK(b[1] == 0.5);
  CHECK(b[2] == 0.25);
  CHECK(b[3] == 0.125);
}

TEST_CASE("gram_basis: hand-evaluated recurrence") {
  auto xt = Tensor<double>::scalar(1.0);
  auto rc = Tensor<double>({2}, {0.5, 0.25});
  auto b = kernels::gram_basis_fwd(xt, rc, 3);
  CHECK(b[0] == doctest::Approx(1.0));
  CHECK(b[1] == doctest::Approx(1.0));
  CHECK(b[2] == doctest::Approx(0.5));
  CHECK(b[3] == doctest::Approx(0.25));
}

TEST_CASE("gram_basis: odd terms vanish at zero") {
  auto xt = Tensor<double>::scalar(0.0);
  auto rc = Tensor<double>({2}, {0.3, 0.7});
  auto b = kernels::gram_basis_fwd(xt, rc, 3);
  CHECK(b[0] == doctest::Approx(1.0));
  CHECK(b[1] == doctest::Approx(0.0));
  CHECK(b[2] == doctest::Approx(-0.3));
  CHECK(b[3] == doctest::Approx(0.0));
}

TEST_CASE("gram_basis: monomial degeneration is exact for degrees up to 6") {
  RngStream rng(3);
  for (int degree = 1; degree <= 6; ++degree) {
    auto xt = test_ref::random_tensor({50}, rng, -1.0, 1.0);
    auto rc = Tensor<double>::zeros({degree - 1});
    auto b = kernels::gram_basis_fwd(xt, rc, degree);
    for (int64_t i = 0; i < xt.numel(); ++i) {
      double p = 1.0;
      for (int d = 0; d <= degree; ++d) {
        CHECK(b[int64_t(d) * xt.numel() + i] == p);
        p *= xt[i];
      }
    }
  }
}

TEST_CASE("gram_basis: bounded by 1 on [-1,1] with zero coefficients") {
  RngStream rng(5);
  auto xt = test_ref::random_tensor({200}, rng, -1.0, 1.0);
  auto rc = Tensor<double>::zeros({5});
  auto b = kernels::gram_basis_fwd(xt, rc, 6);
  for (int64_t i = 0; i < b.numel(); ++i) CHECK(std::abs(b[i]) <= 1.0);
}

TEST_CASE("gram_basis: gradients w.r.t. input and coefficients pass finite differences") {
  for (int trial = 0; trial < 10; ++trial) {
    RngStream rng(700 + trial);
    const int degree = 2 + static_cast<int>(rng.uniform_index(4));
    auto xt = test_ref::random_tensor({6}, rng, -0.95, 0.95);
    auto rc = test_ref::random_tensor({degree - 1}, rng, -0.5, 0.5);
    auto proj = test_ref::random_projection({degree + 1, 6}, rng);
    auto build = [&](const std::vector<Var<double>>& v) {
      return ag::sum_all(ag::mul(ag::gram_basis(v[0], v[1], degree), Var<double>::constant(proj)));
    };
    CHECK(test_ref::gradcheck_max_rel(build, {xt, rc}) <= 1e-4);
  }
}

TEST_CASE("gram_activation: only G_0 surviving gives the constant 1") {
  RngStream rng(7);
  auto x = test_ref::random_tensor({10}, rng, -3.0, 3.0);
  auto w = Tensor<double>({4}, {1, 0, 0, 0});
  auto wm = Tensor<double>::scalar(0.0);
  auto rc = test_ref::random_tensor({2}, rng, -0.5, 0.5);
  auto y = ag::gram_activation(Var<double>::constant(x), Var<double>::constant(w), Var<double>::constant(wm),
                               Var<double>::constant(rc), 3);
  for (int64_t i = 0; i < y.value().numel(); ++i) CHECK(y.value()[i] == doctest::Approx(1.0));
}

TEST_CASE("gram_activation: pure residual weight reduces to SiLU") {
  auto x = Tensor<double>({3}, {0.0, 1.0, -2.0});
  auto w = Tensor<double>::zeros({4});
  auto wm = Tensor<double>::scalar(1.0);
  auto rc = Tensor<double>::zeros({2});
  auto y = ag::gram_activation(Var<double>::constant(x), Var<double>::constant(w), Var<double>::constant(wm),
                               Var<double>::constant(rc), 3);
  CHECK(y.value()[0] == doctest::Approx(0.0));
  CHECK(y.value()[1] == doctest::Approx(0.7310585786).epsilon(1e-9));
}

TEST_CASE("gram_activation: weight on G_1 reduces to tanh") {
  auto x = Tensor<double>({1}, {2.0});
  auto w = Tensor<double>({4}, {0, 1, 0, 0});
  auto wm = Tensor<double>::scalar(0.0);
  auto rc = Tensor<double>({2}, {0.4, -0.2});
  auto y = ag::gram_activation(Var<double>::constant(x), Var<double>::constant(w), Var<double>::constant(wm),
                               Var<double>::constant(rc), 3);
  CHECK(y.value()[0] == doctest::Approx(0.9640276).epsilon(1e-7));
}

TEST_CASE("gram_activation: full gradient check") {
  for (int trial = 0; trial < 10; ++trial) {
    RngStream rng(900 + trial);
    auto x = test_ref::random_tensor({8}, rng, -2.0, 2.0);
    auto w = test_ref::random_tensor({4}, rng);
    auto wm = test_ref::random_tensor({1}, rng);
    auto rc = test_ref::random_tensor({2}, rng, -0.5, 0.5);
    auto proj = test_ref::random_projection({8}, rng);
    auto build = [&](const std::vector<Var<double>>& v) {
      return ag::sum_all(ag::mul(ag::gram_activation(v[0], v[1], v[2], v[3], 3), Var<double>::constant(proj)));
    };
    CHECK(test_ref::gradcheck_max_rel(build, {x, w, wm, rc}) <= 1e-4);
  }
}

TEST_CASE("kan_conv: 2x2 shared window sums the per-cell activation") {
  RngStream rng(11);
  KanGeom g = shared_geom(1, 1, 2, 1, 0, 3);
  auto weights = init_kan_conv<double>(g, 99);
  auto x = test_ref::random_tensor({1, 1, 2, 2}, rng, -2.0, 2.0);
  auto y = kernels::kan_direct_fwd(x, weights.poly, weights.residual, weights.recurrence, g);
  CHECK(y.numel() == 1);

  // phi applied to each window cell separately, then summed
  double expect = 0.0;
  for (int64_t i = 0; i < 4; ++i) {
    auto cell = Tensor<double>::scalar(x[i]);
    auto w = Tensor<double>({4}, {weights.poly[0], weights.poly[1], weights.poly[2], weights.poly[3]});
    auto phi = ag::gram_activation(Var<double>::constant(cell), Var<double>::constant(w),
                                   Var<double>::constant(Tensor<double>::scalar(weights.residual[0])),
                                   Var<double>::constant(weights.recurrence), 3);
    expect += phi.value()[0];
  }
  CHECK(y[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("kan_conv: constant activation counts window contributions") {
  KanGeom g = shared_geom(3, 2, 2, 1, 0, 3);
  KanConvWeights<double> w{Tensor<double>(kan_poly_shape<double>(g)), Tensor<double>(kan_residual_shape<double>(g)),
                           Tensor<double>::zeros({2})};
  for (int co = 0; co < g.cout; ++co)
    for (int ci = 0; ci < g.cin; ++ci) w.poly[(int64_t(co) * g.cin + ci) * 4 + 0] = 1.0;
  RngStream rng(13);
  auto x = test_ref::random_tensor({2, 3, 5, 5}, rng);
  auto y = kernels::kan_direct_fwd(x, w.poly, w.residual, w.recurrence, g);
  for (int64_t i = 0; i < y.numel(); ++i) CHECK(y[i] == doctest::Approx(3.0 * 4.0).epsilon(1e-12));
}

TEST_CASE("kan_conv: direct path matches an independently written evaluation") {
  RngStream rng(17);
  KanGeom g = shared_geom(3, 4, 3, 2, 1, 3);
  auto w = init_kan_conv<double>(g, 5);
  auto x = test_ref::random_tensor({2, 3, 7, 7}, rng, -2.0, 2.0);
  auto y = kernels::kan_direct_fwd(x, w.poly, w.residual, w.recurrence, g);
  auto ref = test_ref::naive_kan_shared(x, w.poly, w.residual, w.recurrence, g.k, g.stride, g.pad, g.degree);
  CHECK(test_ref::max_rel_diff(y, ref, 1e-9) <= 1e-12);
}

TEST_CASE("kan_conv: elementwise mode with replicated parameters equals shared mode exactly") {
  RngStream rng(19);
  KanGeom g = shared_geom(2, 3, 3, 1, 1, 3);
  auto shared = init_kan_conv<double>(g, 21);
  auto rep = replicate_to_elementwise(shared, g);
  KanGeom ge = g;
  ge.elementwise = true;
  auto x = test_ref::random_tensor({2, 2, 6, 6}, rng, -2.0, 2.0);

  auto y_shared = kernels::kan_direct_fwd(x, shared.poly, shared.residual, shared.recurrence, g);
  auto y_rep = kernels::kan_direct_fwd(x, rep.poly, rep.residual, rep.recurrence, ge);
  for (int64_t i = 0; i < y_shared.numel(); ++i) CHECK(y_shared[i] == y_rep[i]);

  auto f_shared = kernels::kan_fused_fwd(x, shared.poly, shared.residual, shared.recurrence, g);
  auto f_rep = kernels::kan_fused_fwd(x, rep.poly, rep.residual, rep.recurrence, ge);
  for (int64_t i = 0; i < f_shared.numel(); ++i) CHECK(f_shared[i] == f_rep[i]);
}

TEST_CASE("kan_conv: polynomial parameter ratio between modes is k^2") {
  for (int k : {1, 2, 3, 5, 7}) {
    KanGeom g = shared_geom(3, 4, k, 1, 0, 3);
    KanGeom ge = g;
    ge.elementwise = true;
    CHECK(ge.poly_weight_count() == g.poly_weight_count() * k * k);
  }
}

TEST_CASE("kan_conv: decoupled expansion has Cin*(D+1) channels and the conv shape law holds") {
  RngStream rng(23);
  auto x = test_ref::random_tensor({1, 2, 5, 5}, rng);
  auto rc = Tensor<double>::zeros({2});
  auto e = kernels::gram_expand_fwd(x, rc, 3);
  CHECK(e.shape() == std::vector<int>{1, 8, 5, 5});

  KanGeom g = shared_geom(1, 3, 3, 2, 1, 3);
  auto w = init_kan_conv<double>(g, 3);
  auto x2 = test_ref::random_tensor({1, 1, 5, 5}, rng);
  auto y = ag::kan_conv_decoupled(Var<double>::constant(x2), Var<double>::constant(w.poly),
                                  Var<double>::constant(w.residual), Var<double>::constant(w.recurrence), g);
  CHECK(y.value().shape() == std::vector<int>{1, 3, 3, 3});
}

TEST_CASE("kan_conv: three-path equivalence in both dtypes") {
  struct Cfg {
    int n, cin, cout, k, stride, pad, degree;
  };
  const Cfg cfgs[] = {{1, 1, 1, 1, 1, 0, 1}, {2, 3, 4, 3, 1, 1, 3}, {2, 2, 3, 2, 2, 0, 2},
                      {1, 4, 2, 5, 2, 2, 4}, {2, 1, 5, 7, 1, 3, 3}, {3, 2, 2, 3, 2, 1, 1}};
  int idx = 0;
  for (const auto& c : cfgs) {
    RngStream rng(400 + idx++);
    KanGeom g = shared_geom(c.cin, c.cout, c.k, c.stride, c.pad, c.degree);
    auto w = init_kan_conv<double>(g, 1000 + idx);
    const int hw = c.k + 5;
    auto x = test_ref::random_tensor({c.n, c.cin, hw, hw}, rng, -2.0, 2.0);

    auto xd = Var<double>::constant(x);
    auto pd = Var<double>::constant(w.poly), rd = Var<double>::constant(w.residual),
         cd = Var<double>::constant(w.recurrence);
    auto direct = ag::kan_conv_direct(xd, pd, rd, cd, g);
    auto dec = ag::kan_conv_decoupled(xd, pd, rd, cd, g);
    auto fus = ag::kan_conv_fused(xd, pd, rd, cd, g);
    CHECK(test_ref::normwise_rel_diff(direct.value(), dec.value()) <= 1e-12);
    CHECK(test_ref::normwise_rel_diff(direct.value(), fus.value()) <= 1e-12);

    auto xf = Var<float>::constant(x.cast<float>());
    auto pf = Var<float>::constant(w.poly.cast<float>()), rf = Var<float>::constant(w.residual.cast<float>()),
         cf = Var<float>::constant(w.recurrence.cast<float>());
    auto direct_f = ag::kan_conv_direct(xf, pf, rf, cf, g);
    auto dec_f = ag::kan_conv_decoupled(xf, pf, rf, cf, g);
    auto fus_f = ag::kan_conv_fused(xf, pf, rf, cf, g);
    CHECK(test_ref::normwise_rel_diff(direct_f.value(), dec_f.value()) <= 1e-6);
    CHECK(test_ref::normwise_rel_diff(direct_f.value(), fus_f.value()) <= 1e-6);
  }
}

TEST_CASE("kan_conv: gradients of all three paths agree and pass finite differences") {
  for (int trial = 0; trial < 4; ++trial) {
    RngStream rng(600 + trial);
    KanGeom g = shared_geom(2, 3, 1 + 2 * static_cast<int>(rng.uniform_index(2)), 1, 1, 3);
    auto w = init_kan_conv<double>(g, 80 + trial);
    auto x = test_ref::random_tensor({2, 2, 5, 5}, rng, -2.0, 2.0);
    const int ho = kernels::conv_out_extent(5, g.k, g.stride, g.pad);
    auto proj = test_ref::random_projection({2, 3, ho, ho}, rng);

    for (KanPath path : {KanPath::direct, KanPath::decoupled, KanPath::fused}) {
      auto build = [&](const std::vector<Var<double>>& v) {
        auto y = ag::kan_conv_path(v[0], v[1], v[2], v[3], g, path);
        return ag::sum_all(ag::mul(y, Var<double>::constant(proj)));
      };
      CHECK(test_ref::gradcheck_max_rel(build, {x, w.poly, w.residual, w.recurrence}) <= 1e-4);
    }
  }
}

TEST_CASE("kan_conv: elementwise direct gradient passes finite differences") {
  RngStream rng(77);
  KanGeom g = shared_geom(2, 2, 3, 2, 1, 3);
  g.elementwise = true;
  auto w = init_kan_conv<double>(g, 42);
  auto x = test_ref::random_tensor({1, 2, 5, 5}, rng, -2.0, 2.0);
  auto proj = test_ref::random_projection({1, 2, 3, 3}, rng);
  for (bool fused : {false, true}) {
    auto build = [&](const std::vector<Var<double>>& v) {
      auto y = fused ? ag::kan_conv_omp(v[0], v[1], v[2], v[3], g) : ag::kan_conv_direct(v[0], v[1], v[2], v[3], g);
      return ag::sum_all(ag::mul(y, Var<double>::constant(proj)));
    };
    CHECK(test_ref::gradcheck_max_rel(build, {x, w.poly, w.residual, w.recurrence}) <= 1e-4);
  }
}

TEST_CASE("kan_conv: fused and decoupled reject elementwise mode") {
  KanGeom g = shared_geom(1, 1, 2, 1, 0, 3);
  g.elementwise = true;
  auto w = init_kan_conv<double>(g, 1);
  auto x = Var<double>::constant(Tensor<double>::ones({1, 1, 3, 3}));
  auto p = Var<double>::constant(w.poly), r = Var<double>::constant(w.residual),
       c = Var<double>::constant(w.recurrence);
  CHECK_THROWS_AS(ag::kan_conv_fused(x, p, r, c, g), ConfigError);
  CHECK_THROWS_AS(ag::kan_conv_decoupled(x, p, r, c, g), ConfigError);
}

TEST_CASE("kan_conv: fused closed form on zero input") {
  KanGeom g = shared_geom(2, 3, 3, 1, 0, 3);
  auto w = init_kan_conv<double>(g, 7);
  w.residual.fill(0.0);
  auto x = Tensor<double>::zeros({1, 2, 6, 6});
  auto y = kernels::kan_fused_fwd(x, w.poly, w.residual, w.recurrence, g);
  // At zero input t = 0, so G = [1, 0, -rc0, 0] and each output channel is a
  // constant field: sum_ci k^2 * (w0 - rc0*w2).
  for (int co = 0; co < 3; ++co) {
    double expect = 0.0;
    for (int ci = 0; ci < 2; ++ci) {
      const double w0 = w.poly[(int64_t(co) * 2 + ci) * 4 + 0];
      const double w2 = w.poly[(int64_t(co) * 2 + ci) * 4 + 2];
      expect += 9.0 * (w0 - double(w.recurrence[0]) * w2);
    }
    for (int oh = 0; oh < y.dim(2); ++oh)
      for (int ow = 0; ow < y.dim(3); ++ow) CHECK(y.at4(0, co, oh, ow) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("kan_conv: translation equivariance at stride 1") {
  RngStream rng(31);
  KanGeom g = shared_geom(2, 2, 3, 1, 0, 3);
  auto w = init_kan_conv<double>(g, 9);
  auto x = test_ref::random_tensor({1, 2, 8, 8}, rng);
  // shift down by one pixel
  Tensor<double> xs({1, 2, 8, 8});
  for (int c = 0; c < 2; ++c)
    for (int h = 1; h < 8; ++h)
      for (int ww = 0; ww < 8; ++ww) xs.at4(0, c, h, ww) = x.at4(0, c, h - 1, ww);
  auto y = kernels::kan_fused_fwd(x, w.poly, w.residual, w.recurrence, g);
  auto ys = kernels::kan_fused_fwd(xs, w.poly, w.residual, w.recurrence, g);
  for (int co = 0; co < 2; ++co)
    for (int oh = 1; oh < y.dim(2); ++oh)
      for (int ow = 0; ow < y.dim(3); ++ow) CHECK(ys.at4(0, co, oh, ow) == y.at4(0, co, oh - 1, ow));
}

TEST_CASE("init: sigma formula and determinism") {
  KanGeom g = shared_geom(16, 8, 3, 1, 1, 3);
  CHECK(recurrence_init_sigma(g) == doctest::Approx(1.0 / 576.0).epsilon(1e-12));
  CHECK(recurrence_init_sigma(g) == doctest::Approx(0.0017361).epsilon(1e-4));

  auto a = init_kan_conv<float>(g, 12345);
  auto b = init_kan_conv<float>(g, 12345);
  for (int64_t i = 0; i < a.poly.numel(); ++i) CHECK(a.poly[i] == b.poly[i]);
  for (int64_t i = 0; i < a.residual.numel(); ++i) CHECK(a.residual[i] == b.residual[i]);
  for (int64_t i = 0; i < a.recurrence.numel(); ++i) CHECK(a.recurrence[i] == b.recurrence[i]);

  auto c = init_kan_conv<float>(g, 54321);
  bool any_diff = false;
  for (int64_t i = 0; i < a.poly.numel(); ++i) any_diff = any_diff || a.poly[i] != c.poly[i];
  CHECK(any_diff);
}

TEST_CASE("init: empirical stddev of recurrence draws matches sigma") {
  KanGeom g;
  g.cin = 1;
  g.cout = 1;
  g.k = 1;
  g.degree = 12;
  const double sigma = recurrence_init_sigma(g);
  double sum = 0.0, sumsq = 0.0;
  int64_t count = 0;
  for (uint64_t seed = 0; count < 1000000; ++seed) {
    auto w = init_kan_conv<double>(g, seed);
    for (int64_t i = 0; i < w.recurrence.numel(); ++i) {
      sum += w.recurrence[i];
      sumsq += w.recurrence[i] * w.recurrence[i];
      ++count;
    }
  }
  const double mean = sum / double(count);
  const double stddev = std::sqrt(sumsq / double(count) - mean * mean);
  CHECK(std::abs(stddev - sigma) / sigma <= 0.02);
}
