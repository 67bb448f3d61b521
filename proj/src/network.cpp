#include "reskan/network.hpp"

#include <algorithm>

namespace reskan {

const char* ablation_row_name(AblationRow row) {
  switch (row) {
    case AblationRow::baseline: return "baseline";
    case AblationRow::kan: return "+kan";
    case AblationRow::gram: return "+gram";
    case AblationRow::bottleneck: return "+bottleneck";
    case AblationRow::shared: return "+shared";
  }
  return "?";
}

AblationRow ablation_row_from_string(const std::string& s) {
  for (AblationRow r : {AblationRow::baseline, AblationRow::kan, AblationRow::gram, AblationRow::bottleneck,
                        AblationRow::shared})
    if (s == ablation_row_name(r) || ("+" + s) == ablation_row_name(r)) return r;
  throw UsageError("unknown ablation row '" + s + "'; valid rows: baseline, +kan, +gram, +bottleneck, +shared");
}

void NetworkConfig::validate() const {
  if (in_channels < 1) throw ConfigError("network.in_channels must be >= 1");
  if (num_classes < 2) throw ConfigError("network.num_classes must be >= 2");
  if (stem_channels < 1) throw ConfigError("network.stem_channels must be >= 1");
  if (stem_kernel < 1 || stem_kernel % 2 == 0) throw ConfigError("network.stem_kernel must be odd and positive");
  if (stem_stride < 1) throw ConfigError("network.stem_stride must be >= 1");
  for (int b : stage_blocks)
    if (b < 1) throw ConfigError("network.blocks entries must be >= 1");
  if (expansion < 1) throw ConfigError("network.expansion must be >= 1");
  for (size_t i = 1; i < widths.size(); ++i)
    if (widths[i] <= widths[i - 1]) throw ConfigError("network.widths must be strictly increasing");
  if (widths[0] < 1) throw ConfigError("network.widths entries must be >= 1");
  if (degree < 1 || degree > kernels::kMaxDegree)
    throw ConfigError("network.degree must be in [1," + std::to_string(kernels::kMaxDegree) + "]");
  if (dropout < 0.0f || dropout >= 1.0f) throw ConfigError("network.dropout must be in [0,1)");
  // The switches form a cumulative ladder; other combinations are not
  // evaluated designs.
  const bool valid_combo = (!kan_conv && !gram_basis && !bottleneck && !shared_activation) ||
                           (kan_conv && !gram_basis && !bottleneck && !shared_activation) ||
                           (kan_conv && gram_basis && !bottleneck && !shared_activation) ||
                           (kan_conv && gram_basis && bottleneck && !shared_activation) ||
                           (kan_conv && gram_basis && bottleneck && shared_activation);
  if (!valid_combo)
    throw ConfigError(
        "network switch combination is not on the cumulative ablation ladder "
        "(kan_conv -> gram_basis -> bottleneck -> shared_activation)");
  if (kan_conv && basis == BasisKind::spline)
    throw ConfigError("network.basis = spline is not implemented; only the gram basis ships");
}

NetworkConfig NetworkConfig::paper_scale() { return NetworkConfig{}; }

NetworkConfig NetworkConfig::tiny(int num_classes) {
  NetworkConfig c;
  c.num_classes = num_classes;
  c.stem_channels = 16;
  c.widths = {8, 16, 32, 64};
  c.expansion = 2;
  return c;
}

NetworkConfig apply_ablation(NetworkConfig base, AblationRow row) {
  base.kan_conv = row >= AblationRow::kan;
  base.gram_basis = row >= AblationRow::gram;
  base.bottleneck = row >= AblationRow::bottleneck;
  base.shared_activation = row >= AblationRow::shared;
  base.basis = base.gram_basis ? BasisKind::gram : BasisKind::monomial;
  base.validate();
  return base;
}

FParam* ParamRegistry::add(const std::string& name, FTensor init) {
  if (by_name_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  params_.push_back(std::make_unique<FParam>(name, std::move(init)));
  by_name_[name] = params_.back().get();
  return params_.back().get();
}

FParam* ParamRegistry::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

int64_t ParamRegistry::total_count() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p->value.numel();
  return n;
}

namespace {

FVar pvar(FParam* p, const ForwardCtx& ctx) {
  return ctx.mode == Mode::train ? FVar::from_param(*p) : FVar::leaf(p->value, false);
}

FTensor kaiming_uniform(std::vector<int> shape, int64_t fan_in, uint64_t seed, const std::string& label) {
  FTensor t(std::move(shape));
  RngStream rng = RngStream::labeled(seed, label);
  kaiming_uniform_fill(t, fan_in, rng);
  return t;
}

struct Builder {
  const NetworkConfig& cfg;
  uint64_t seed;
  ParamRegistry& reg;
  std::vector<std::pair<std::string, std::shared_ptr<ag::BatchNormState<float>>>>& norm_states;

  BatchNorm2dLayer make_norm(const std::string& prefix, int channels) {
    BatchNorm2dLayer n;
    n.gamma = reg.add(prefix + ".gamma", FTensor::ones({channels}));
    n.beta = reg.add(prefix + ".beta", FTensor::zeros({channels}));
    n.state = std::make_shared<ag::BatchNormState<float>>(channels);
    norm_states.emplace_back(prefix, n.state);
    return n;
  }

  ConvUnit make_kan_unit(const std::string& prefix, int cin, int cout, int k, int stride, int pad) {
    ConvUnit u;
    u.is_kan = true;
    u.geom.cin = cin;
    u.geom.cout = cout;
    u.geom.k = k;
    u.geom.stride = stride;
    u.geom.pad = pad;
    u.geom.degree = cfg.degree;
    u.geom.elementwise = !cfg.shared_activation;
    auto w = init_kan_conv<float>(u.geom, seed, prefix);
    u.poly = reg.add(prefix + ".poly_weight", std::move(w.poly));
    u.residual = reg.add(prefix + ".residual_weight", std::move(w.residual));
    if (cfg.basis == BasisKind::gram) {
      u.recurrence = reg.add(prefix + ".recurrence", std::move(w.recurrence));
    } else {
      u.frozen_rc = FTensor::zeros({cfg.degree - 1});
    }
    if (cfg.kan_pre_norm) u.pre_norm = make_norm(prefix + ".norm", cin);
    return u;
  }

  ConvUnit make_ordinary_unit(const std::string& prefix, int cin, int cout, int k, int stride, int pad,
                              bool with_norm) {
    ConvUnit u;
    u.is_kan = false;
    u.stride = stride;
    u.pad = pad;
    u.weight = reg.add(prefix + ".weight",
                       kaiming_uniform({cout, cin, k, k}, int64_t(cin) * k * k, seed, prefix + ".weight"));
    if (with_norm) u.norm = make_norm(prefix + ".norm", cin);
    return u;
  }

  ConvUnit make_unit(const std::string& prefix, int cin, int cout, int k, int stride, int pad) {
    if (cfg.kan_conv) return make_kan_unit(prefix, cin, cout, k, stride, pad);
    return make_ordinary_unit(prefix, cin, cout, k, stride, pad, true);
  }

  Block make_block(const std::string& prefix, int cin, int width, int cout, int stride, bool type1) {
    Block b;
    b.type1 = type1;
    if (cfg.bottleneck) {
      b.branch1.push_back(make_unit(prefix + ".conv1", cin, width, 1, 1, 0));
      b.branch1.push_back(make_unit(prefix + ".conv2", width, width, 3, stride, 1));
      b.branch1.push_back(make_unit(prefix + ".conv3", width, cout, 1, 1, 0));
    } else {
      b.branch1.push_back(make_unit(prefix + ".conv1", cin, cout, 3, stride, 1));
      b.branch1.push_back(make_unit(prefix + ".conv2", cout, cout, 3, 1, 1));
    }
    if (type1) {
      b.proj = make_unit(prefix + ".proj", cin, cout, 1, stride, 0);
      b.proj_pre_silu = cfg.kan_conv;
    }
    return b;
  }
};

}  // namespace

FVar BatchNorm2dLayer::forward(const FVar& x, const ForwardCtx& ctx) const {
  return ag::batch_norm2d(x, pvar(gamma, ctx), pvar(beta, ctx), *state, ctx.mode == Mode::train);
}

FVar ConvUnit::forward(const FVar& x, const ForwardCtx& ctx) const {
  if (is_kan) {
    FVar h = pre_norm ? pre_norm->forward(x, ctx) : x;
    FVar rc = recurrence ? pvar(recurrence, ctx) : FVar::leaf(frozen_rc, false);
    if (geom.elementwise) return ag::kan_conv_omp(h, pvar(poly, ctx), pvar(residual, ctx), rc, geom);
    return ag::kan_conv_path(h, pvar(poly, ctx), pvar(residual, ctx), rc, geom, ctx.kan_path);
  }
  FVar h = norm ? norm->forward(x, ctx) : x;
  return ag::conv2d(ag::silu(h), pvar(weight, ctx), stride, pad);
}

FVar Block::forward(const FVar& x, const ForwardCtx& ctx) const {
  FVar b1 = x;
  for (const auto& u : branch1) b1 = u.forward(b1, ctx);
  if (!type1) return ag::add(b1, x);
  FVar skip_in = proj_pre_silu ? ag::silu(x) : x;
  return ag::add(b1, proj->forward(skip_in, ctx));
}

FVar Stem::forward(const FVar& x, const ForwardCtx& ctx) const {
  FVar h = ag::conv2d(x, pvar(conv.weight, ctx), conv.stride, conv.pad);
  if (kan) h = ag::add(h, kan->forward(x, ctx));
  h = ag::silu(norm.forward(h, ctx));
  return ag::maxpool2d(h, 3, 2, 1);
}

LightResKan LightResKan::build(const NetworkConfig& cfg, uint64_t seed) {
  cfg.validate();
  LightResKan m;
  m.cfg_ = cfg;
  m.seed_ = seed;
  Builder b{cfg, seed, m.registry_, m.norm_states_};

  const int pad = cfg.stem_kernel / 2;
  m.stem_.conv = b.make_ordinary_unit("stem.conv", cfg.in_channels, cfg.stem_channels, cfg.stem_kernel,
                                      cfg.stem_stride, pad, false);
  if (cfg.kan_conv)
    m.stem_.kan = b.make_kan_unit("stem.kan", cfg.in_channels, cfg.stem_channels, cfg.stem_kernel, cfg.stem_stride,
                                  pad);
  m.stem_.norm = b.make_norm("stem.norm", cfg.stem_channels);

  int cin = cfg.stem_channels;
  for (int s = 0; s < 4; ++s) {
    std::vector<Block> stage;
    const int width = cfg.widths[static_cast<size_t>(s)];
    const int cout = cfg.stage_out_channels(s);
    const int stride = (s == 0) ? 1 : 2;
    for (int i = 0; i < cfg.stage_blocks[static_cast<size_t>(s)]; ++i) {
      const std::string prefix = "stage" + std::to_string(s + 1) + ".block" + std::to_string(i);
      stage.push_back(b.make_block(prefix, i == 0 ? cin : cout, width, cout, i == 0 ? stride : 1, i == 0));
    }
    m.stages_.push_back(std::move(stage));
    cin = cout;
  }

  m.fc_weight_ = m.registry_.add(
      "head.fc.weight", kaiming_uniform({cfg.num_classes, cin}, cin, seed, "head.fc.weight"));
  m.fc_bias_ = m.registry_.add("head.fc.bias", FTensor::zeros({cfg.num_classes}));
  return m;
}

LightResKan::Out LightResKan::run(const FVar& x, const ForwardCtx& ctx) const {
  const auto& shape = x.value().shape();
  if (shape.size() != 4 || shape[1] != cfg_.in_channels)
    throw ConfigError("forward expects input [N," + std::to_string(cfg_.in_channels) + ",H,W], got " +
                      FTensor::shape_str(shape));
  if (shape[2] < 32 || shape[3] < 32)
    throw ConfigError("spatial underflow: input " + std::to_string(shape[2]) + "x" + std::to_string(shape[3]) +
                      " is below the 32x32 minimum for four stride-2 reductions");
  if (ctx.mode == Mode::train && ctx.dropout_rng == nullptr)
    throw UsageError("train-mode forward needs a dropout rng");

  FVar h = stem_.forward(x, ctx);
  for (const auto& stage : stages_)
    for (const auto& block : stage) h = block.forward(h, ctx);
  FVar pooled = ag::global_avgpool(h);
  FVar features = ag::reshape(pooled, {shape[0], cfg_.feature_dim()});
  FVar dropped = features;
  if (ctx.mode == Mode::train && cfg_.dropout > 0.0f)
    dropped = ag::dropout(features, cfg_.dropout, true, *ctx.dropout_rng);
  FVar logits = ag::linear(dropped, pvar(fc_weight_, ctx), pvar(fc_bias_, ctx));
  return {features, logits};
}

FTensor LightResKan::logits_eval(const FTensor& x) const {
  ForwardCtx ctx;
  return run(FVar::leaf(x, false), ctx).logits.value();
}

FTensor LightResKan::features_eval(const FTensor& x) const {
  ForwardCtx ctx;
  return run(FVar::leaf(x, false), ctx).features.value();
}

std::vector<FParam*> LightResKan::parameters() const {
  std::vector<FParam*> out;
  out.reserve(registry_.all().size());
  for (const auto& p : registry_.all()) out.push_back(p.get());
  return out;
}

std::vector<std::pair<std::string, FTensor*>> LightResKan::buffers() {
  std::vector<std::pair<std::string, FTensor*>> out;
  for (auto& [name, state] : norm_states_) {
    out.emplace_back(name + ".running_mean", &state->running_mean);
    out.emplace_back(name + ".running_var", &state->running_var);
  }
  return out;
}

}  // namespace reskan
