#pragma once

// Light-ResKAN network: a fused ordinary+KAN stem, four stages of residual
// ResKAGN blocks (3/4/6/3 by default), global average pooling, dropout and a
// linear classification head. Everything is materialized from a declarative
// NetworkConfig; the ablation switches select the cumulative model ladder.

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "reskan/kan.hpp"
#include "reskan/ops.hpp"

namespace reskan {

using FTensor = Tensor<float>;
using FVar = ag::Var<float>;
using FParam = Parameter<float>;

enum class Mode { train, eval };
enum class BasisKind { gram, monomial, spline };

// Cumulative ablation ladder (each row adds one component).
enum class AblationRow { baseline, kan, gram, bottleneck, shared };

const char* ablation_row_name(AblationRow row);
AblationRow ablation_row_from_string(const std::string& s);

struct NetworkConfig {
  int in_channels = 1;
  int num_classes = 10;
  int stem_channels = 32;
  int stem_kernel = 7;
  int stem_stride = 2;
  std::array<int, 4> stage_blocks{3, 4, 6, 3};
  std::array<int, 4> widths{16, 32, 64, 128};  // bottleneck channels per stage
  int expansion = 4;                           // stage output = expansion * width
  int degree = 3;
  float dropout = 0.1f;
  bool kan_conv = true;
  bool gram_basis = true;  // learnable recurrence coefficients (off: monomial basis)
  bool bottleneck = true;
  bool shared_activation = true;
  bool kan_pre_norm = true;
  BasisKind basis = BasisKind::gram;

  void validate() const;
  int stage_out_channels(int stage) const { return expansion * widths[static_cast<size_t>(stage)]; }
  int feature_dim() const { return stage_out_channels(3); }

  static NetworkConfig paper_scale();
  static NetworkConfig tiny(int num_classes = 4);
};

// Applies one row of the cumulative ladder to a base config.
NetworkConfig apply_ablation(NetworkConfig base, AblationRow row);

class ParamRegistry {
 public:
  FParam* add(const std::string& name, FTensor init);
  FParam* find(const std::string& name) const;
  const std::vector<std::unique_ptr<FParam>>& all() const { return params_; }
  int64_t total_count() const;

 private:
  std::vector<std::unique_ptr<FParam>> params_;
  std::unordered_map<std::string, FParam*> by_name_;
};

struct ForwardCtx {
  Mode mode = Mode::eval;
  RngStream* dropout_rng = nullptr;
  KanPath kan_path = KanPath::fused;
};

struct BatchNorm2dLayer {
  FParam* gamma = nullptr;
  FParam* beta = nullptr;
  std::shared_ptr<ag::BatchNormState<float>> state;
  FVar forward(const FVar& x, const ForwardCtx& ctx) const;
};

// One convolution unit. The KAN flavor is (pre-norm ->) kan conv; the
// ordinary flavor is norm -> SiLU -> conv.
struct ConvUnit {
  bool is_kan = false;
  // kan flavor
  KanGeom geom;
  FParam* poly = nullptr;
  FParam* residual = nullptr;
  FParam* recurrence = nullptr;  // null when the basis is monomial
  FTensor frozen_rc;             // zeros, used when recurrence is null
  std::optional<BatchNorm2dLayer> pre_norm;
  // ordinary flavor
  FParam* weight = nullptr;
  int stride = 1;
  int pad = 0;
  std::optional<BatchNorm2dLayer> norm;

  int out_channels() const { return is_kan ? geom.cout : weight->value.shape()[0]; }
  FVar forward(const FVar& x, const ForwardCtx& ctx) const;
};

struct Block {
  bool type1 = false;  // projection branch; type2 keeps an identity skip
  std::vector<ConvUnit> branch1;
  std::optional<ConvUnit> proj;
  bool proj_pre_silu = false;  // KAN variant applies SiLU to the block input first
  FVar forward(const FVar& x, const ForwardCtx& ctx) const;
};

struct Stem {
  ConvUnit conv;                 // ordinary convolution
  std::optional<ConvUnit> kan;   // KAN convolution, summed with the ordinary one
  BatchNorm2dLayer norm;
  FVar forward(const FVar& x, const ForwardCtx& ctx) const;
};

class LightResKan {
 public:
  static LightResKan build(const NetworkConfig& cfg, uint64_t seed);

  struct Out {
    FVar features;  // post global-average-pool, pre-dropout
    FVar logits;
  };
  Out run(const FVar& x, const ForwardCtx& ctx) const;

  // Convenience eval-mode entry points on plain tensors.
  FTensor logits_eval(const FTensor& x) const;
  FTensor features_eval(const FTensor& x) const;

  std::vector<FParam*> parameters() const;
  std::vector<std::pair<std::string, FTensor*>> buffers();
  const NetworkConfig& config() const { return cfg_; }

  const Stem& stem() const { return stem_; }
  const std::vector<std::vector<Block>>& stages() const { return stages_; }
  FParam* fc_weight() const { return fc_weight_; }
  FParam* fc_bias() const { return fc_bias_; }
  ParamRegistry& registry() { return registry_; }
  const ParamRegistry& registry() const { return registry_; }

 private:
  NetworkConfig cfg_;
  uint64_t seed_ = 0;
  ParamRegistry registry_;
  Stem stem_;
  std::vector<std::vector<Block>> stages_;
  FParam* fc_weight_ = nullptr;
  FParam* fc_bias_ = nullptr;
  std::vector<std::pair<std::string, std::shared_ptr<ag::BatchNormState<float>>>> norm_states_;
};

}  // namespace reskan
