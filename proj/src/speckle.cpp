#include "reskan/speckle.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "reskan/errors.hpp"

namespace reskan {

const char* gamma_parametrization_name(GammaParametrization p) {
  return p == GammaParametrization::scale ? "scale" : "rate";
}

GammaParametrization gamma_parametrization_from_string(const std::string& s) {
  if (s == "scale") return GammaParametrization::scale;
  if (s == "rate") return GammaParametrization::rate;
  throw UsageError("unknown gamma parametrization '" + s + "'; expected scale or rate");
}

const char* noise_level_name(NoiseLevel level) {
  switch (level) {
    case NoiseLevel::weak: return "weak";
    case NoiseLevel::medium: return "medium";
    case NoiseLevel::strong: return "strong";
  }
  return "?";
}

NoiseLevel noise_level_from_string(const std::string& s) {
  if (s == "weak") return NoiseLevel::weak;
  if (s == "medium") return NoiseLevel::medium;
  if (s == "strong") return NoiseLevel::strong;
  throw UsageError("unknown noise level '" + s + "'; expected weak, medium or strong");
}

void GammaNoiseSpec::validate() const {
  if (!(shape > 0.0)) throw ConfigError("gamma shape must be > 0");
  if (!(scale_or_rate > 0.0)) throw ConfigError("gamma scale/rate must be > 0");
}

GammaNoiseSpec noise_preset(NoiseLevel level, GammaParametrization parametrization, uint64_t seed) {
  GammaNoiseSpec spec;
  spec.parametrization = parametrization;
  spec.seed = seed;
  switch (level) {
    case NoiseLevel::weak:
      spec.shape = 3.0;
      spec.scale_or_rate = 0.1;
      break;
    case NoiseLevel::medium:
      spec.shape = 1.0;
      spec.scale_or_rate = 0.5;
      break;
    case NoiseLevel::strong:
      spec.shape = 0.5;
      spec.scale_or_rate = 2.0;
      break;
  }
  return spec;
}

double gamma_pdf(double x, const GammaNoiseSpec& spec) {
  spec.validate();
  if (!(x > 0.0)) throw std::domain_error("gamma pdf is defined for x > 0");
  const double a = spec.shape;
  if (spec.parametrization == GammaParametrization::rate) {
    const double b = spec.scale_or_rate;
    return std::exp(a * std::log(b) - std::lgamma(a) + (a - 1.0) * std::log(x) - b * x);
  }
  const double th = spec.scale_or_rate;
  return std::exp(-a * std::log(th) - std::lgamma(a) + (a - 1.0) * std::log(x) - x / th);
}

// Series for small x, continued fraction otherwise.
double regularized_gamma_p(double a, double x) {
  if (x <= 0.0) return 0.0;
  const double lg = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - lg);
  }
  // Lentz continued fraction for Q(a,x).
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -double(i) * (double(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  const double q = std::exp(-x + a * std::log(x) - lg) * h;
  return 1.0 - q;
}

double gamma_cdf(double x, const GammaNoiseSpec& spec) {
  spec.validate();
  if (x <= 0.0) return 0.0;
  return regularized_gamma_p(spec.shape, x / spec.theta());
}

double gamma_sample_unit(RngStream& rng, double alpha) {
  if (alpha < 1.0) {
    const double boosted = gamma_sample_unit(rng, alpha + 1.0);
    return boosted * std::pow(rng.uniform_positive(), 1.0 / alpha);
  }
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform_positive();
    const double xsq = x * x;
    if (u < 1.0 - 0.0331 * xsq * xsq) return d * v;      // squeeze acceptance
    if (std::log(u) < 0.5 * xsq + d * (1.0 - v + std::log(v))) return d * v;
  }
}

Tensor<float> sample_field(const std::vector<int>& shape, const GammaNoiseSpec& spec) {
  spec.validate();
  Tensor<float> field(shape);
  const double th = spec.theta();
  if (shape.size() == 4 && shape[0] > 1) {
    const int n_images = shape[0];
    const int64_t per_image = field.numel() / n_images;
#pragma omp parallel for
    for (int n = 0; n < n_images; ++n) {
      RngStream rng = RngStream::labeled(spec.seed, "speckle", static_cast<uint64_t>(n));
      float* out = field.data() + int64_t(n) * per_image;
      for (int64_t i = 0; i < per_image; ++i)
        out[i] = static_cast<float>(th * gamma_sample_unit(rng, spec.shape));
    }
  } else {
    RngStream rng = RngStream::labeled(spec.seed, "speckle", 0);
    for (int64_t i = 0; i < field.numel(); ++i)
      field[i] = static_cast<float>(th * gamma_sample_unit(rng, spec.shape));
  }
  return field;
}

Tensor<float> apply_speckle_field(const Tensor<float>& image, const Tensor<float>& field) {
  Tensor<float> out(image.shape());
  for (int64_t i = 0; i < image.numel(); ++i)
    out[i] = std::clamp(image[i] * field[i], 0.0f, 1.0f);
  return out;
}

Tensor<float> apply_speckle(const Tensor<float>& image, const GammaNoiseSpec& spec) {
  return apply_speckle_field(image, sample_field(image.shape(), spec));
}

double chi2_critical(int dof, double p) {
  // Wilson-Hilferty; z is the standard normal quantile of p.
  double z;
  if (p >= 0.999) z = 3.090232306167814;
  else if (p >= 0.99) z = 2.3263478740408408;
  else if (p >= 0.95) z = 1.6448536269514722;
  else z = 0.0;
  const double d = static_cast<double>(dof);
  const double term = 1.0 - 2.0 / (9.0 * d) + z * std::sqrt(2.0 / (9.0 * d));
  return d * term * term * term;
}

GofResult gamma_goodness_of_fit(const GammaNoiseSpec& spec, int64_t draws, int bins, double alpha_level) {
  spec.validate();
  // Equal-probability bin edges via bisection on the CDF.
  std::vector<double> edges(static_cast<size_t>(bins) - 1);
  for (int i = 1; i < bins; ++i) {
    const double target = static_cast<double>(i) / bins;
    double lo = 0.0, hi = spec.mean();
    while (gamma_cdf(hi, spec) < target) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (gamma_cdf(mid, spec) < target ? lo : hi) = mid;
    }
    edges[static_cast<size_t>(i) - 1] = 0.5 * (lo + hi);
  }
  std::vector<int64_t> counts(static_cast<size_t>(bins), 0);
  RngStream rng = RngStream::labeled(spec.seed, "gof");
  const double th = spec.theta();
  for (int64_t i = 0; i < draws; ++i) {
    const double v = th * gamma_sample_unit(rng, spec.shape);
    const auto it = std::upper_bound(edges.begin(), edges.end(), v);
    counts[static_cast<size_t>(it - edges.begin())]++;
  }
  const double expected = static_cast<double>(draws) / bins;
  GofResult r;
  for (int64_t c : counts) {
    const double d = static_cast<double>(c) - expected;
    r.statistic += d * d / expected;
  }
  r.dof = bins - 1;
  if (alpha_level != 0.001) throw UsageError("only the 0.001 significance level is tabulated");
  r.critical = chi2_critical(r.dof, 0.999);
  r.reject = r.statistic > r.critical;
  return r;
}

}  // namespace reskan
