#include <cmath>

#include "doctest.h"
#include "reskan/speckle.hpp"

using namespace reskan;

TEST_CASE("gamma_pdf: exponential special cases in both parametrizations") {
  GammaNoiseSpec rate{1.0, 0.5, GammaParametrization::rate, 0};
  CHECK(gamma_pdf(2.0, rate) == doctest::Approx(0.5 * std::exp(-1.0)).epsilon(1e-12));
  CHECK(gamma_pdf(2.0, rate) == doctest::Approx(0.18394).epsilon(1e-4));

  GammaNoiseSpec scale{1.0, 0.5, GammaParametrization::scale, 0};
  CHECK(gamma_pdf(0.5, scale) == doctest::Approx(2.0 * std::exp(-1.0)).epsilon(1e-12));
  CHECK(gamma_pdf(0.5, scale) == doctest::Approx(0.73576).epsilon(1e-4));
}

TEST_CASE("gamma_pdf: integrates to one") {
  for (NoiseLevel level : {NoiseLevel::weak, NoiseLevel::medium, NoiseLevel::strong}) {
    GammaNoiseSpec spec = noise_preset(level);
    // Simpson after the substitution x = e^u; the integrand pdf(e^u)*e^u is
    // smooth even where the density itself is singular at zero.
    const double lo = std::log(spec.mean() * 1e-16);
    const double hi = std::log(50.0 * spec.mean());
    const int steps = 200001;
    const double h = (hi - lo) / (steps - 1);
    double integral = 0.0;
    for (int i = 0; i < steps; ++i) {
      const double u = lo + i * h;
      const double x = std::exp(u);
      const double w = (i == 0 || i == steps - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      integral += w * gamma_pdf(x, spec) * x;
    }
    integral = integral * h / 3.0;
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("gamma_pdf: rejects non-positive arguments") {
  GammaNoiseSpec spec = noise_preset(NoiseLevel::weak);
  CHECK_THROWS_AS(gamma_pdf(0.0, spec), std::domain_error);
  CHECK_THROWS_AS(gamma_pdf(-1.0, spec), std::domain_error);
}

TEST_CASE("gamma_cdf: agrees with the density numerically") {
  GammaNoiseSpec spec = noise_preset(NoiseLevel::medium);
  const double x = 0.7;
  // derivative of CDF = pdf
  const double h = 1e-6;
  const double deriv = (gamma_cdf(x + h, spec) - gamma_cdf(x - h, spec)) / (2.0 * h);
  CHECK(deriv == doctest::Approx(gamma_pdf(x, spec)).epsilon(1e-6));
}

TEST_CASE("sampler: weak preset moments (shape 3, scale 0.1)") {
  GammaNoiseSpec spec = noise_preset(NoiseLevel::weak);
  spec.seed = 1;
  RngStream rng = RngStream::labeled(spec.seed, "m");
  const int64_t n = 1000000;
  double sum = 0.0;
  for (int64_t i = 0; i < n; ++i) sum += spec.theta() * gamma_sample_unit(rng, spec.shape);
  const double mean = sum / n;
  CHECK(std::abs(mean - 0.3) / 0.3 <= 0.01);
}

TEST_CASE("sampler: exponential median at shape 1") {
  GammaNoiseSpec spec = noise_preset(NoiseLevel::medium);
  spec.seed = 2;
  RngStream rng = RngStream::labeled(spec.seed, "m");
  const int64_t n = 400001;
  std::vector<double> draws(n);
  for (auto& d : draws) d = spec.theta() * gamma_sample_unit(rng, spec.shape);
  std::nth_element(draws.begin(), draws.begin() + n / 2, draws.end());
  const double median = draws[n / 2];
  const double expected = spec.theta() * std::log(2.0);
  CHECK(std::abs(median - expected) / expected <= 0.015);
}

TEST_CASE("sampler: strong preset variance (shape 0.5, scale 2)") {
  GammaNoiseSpec spec = noise_preset(NoiseLevel::strong);
  spec.seed = 3;
  RngStream rng = RngStream::labeled(spec.seed, "m");
  const int64_t n = 1000000;
  double sum = 0.0, sumsq = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double v = spec.theta() * gamma_sample_unit(rng, spec.shape);
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(var - 2.0) / 2.0 <= 0.03);
}

TEST_CASE("apply: zero image is a fixed point") {
  auto r = Tensor<float>::zeros({1, 1, 8, 8});
  for (NoiseLevel level : {NoiseLevel::weak, NoiseLevel::medium, NoiseLevel::strong}) {
    auto spec = noise_preset(level);
    auto i = apply_speckle(r, spec);
    for (int64_t k = 0; k < i.numel(); ++k) CHECK(i[k] == 0.0f);
  }
}

TEST_CASE("apply: unit field is the identity") {
  RngStream rng(5);
  Tensor<float> r({2, 1, 4, 4});
  for (int64_t i = 0; i < r.numel(); ++i) r[i] = static_cast<float>(rng.uniform());
  auto field = Tensor<float>::ones(r.shape());
  auto out = apply_speckle_field(r, field);
  for (int64_t i = 0; i < r.numel(); ++i) CHECK(out[i] == r[i]);
}

TEST_CASE("apply: pre-clip expectation is E[R]*shape*scale") {
  GammaNoiseSpec spec = noise_preset(NoiseLevel::weak);
  spec.seed = 7;
  const float c = 0.5f;
  auto r = Tensor<float>::full({64, 1, 32, 32}, c);
  auto field = sample_field(r.shape(), spec);
  double sum = 0.0;
  for (int64_t i = 0; i < r.numel(); ++i) sum += double(r[i]) * double(field[i]);
  const double mean = sum / double(r.numel());
  const double expected = double(c) * spec.mean();
  CHECK(std::abs(mean - expected) / expected <= 0.02);
}

TEST_CASE("presets: the three severity levels") {
  auto weak = noise_preset(NoiseLevel::weak);
  CHECK(weak.shape == 3.0);
  CHECK(weak.scale_or_rate == 0.1);
  auto medium = noise_preset(NoiseLevel::medium);
  CHECK(medium.shape == 1.0);
  CHECK(medium.scale_or_rate == 0.5);
  auto strong = noise_preset(NoiseLevel::strong);
  CHECK(strong.shape == 0.5);
  CHECK(strong.scale_or_rate == 2.0);
  CHECK_THROWS_AS(noise_level_from_string("extreme"), UsageError);
  // rate reading of the same pairs
  auto weak_rate = noise_preset(NoiseLevel::weak, GammaParametrization::rate);
  CHECK(weak_rate.theta() == doctest::Approx(10.0));
}

TEST_CASE("determinism: identical spec and seed give bit-identical fields") {
  GammaNoiseSpec spec = noise_preset(NoiseLevel::medium);
  spec.seed = 11;
  auto a = sample_field({4, 1, 8, 8}, spec);
  auto b = sample_field({4, 1, 8, 8}, spec);
  for (int64_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);
  spec.seed = 12;
  auto c = sample_field({4, 1, 8, 8}, spec);
  bool differs = false;
  for (int64_t i = 0; i < a.numel(); ++i) differs = differs || a[i] != c[i];
  CHECK(differs);
}

TEST_CASE("goodness of fit: sampler matches the density at all presets") {
  for (NoiseLevel level : {NoiseLevel::weak, NoiseLevel::medium, NoiseLevel::strong}) {
    GammaNoiseSpec spec = noise_preset(level);
    spec.seed = 13;
    auto gof = gamma_goodness_of_fit(spec, 200000);
    INFO("level ", noise_level_name(level), " stat ", gof.statistic, " crit ", gof.critical);
    CHECK(!gof.reject);
  }
}
