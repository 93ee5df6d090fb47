#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "muonad/pruning.hpp"
#include "muonad/tensor.hpp"

namespace muonad {

/// Shape and seed of the toy attention stack.
struct ToyModelConfig {
  std::size_t num_layers = 6;
  std::size_t token_count = 8;
  std::size_t embed_dim = 16;
  std::uint64_t seed = 42;
  /// Query/key weights are drawn N(0, (qk_gain^2) / d); larger gains give
  /// peakier attention.
  double qk_gain = 2.0;
  /// Value weights are drawn N(0, (value_gain^2) / d).
  double value_gain = 0.05;

  void validate() const;
  Shape latent_shape() const { return {token_count, embed_dim}; }
};

struct LayerWeights {
  Tensor query;  // (d, d)
  Tensor key;    // (d, d)
  Tensor value;  // (d, d)

  friend bool operator==(const LayerWeights&, const LayerWeights&) = default;
};

/// Single-head residual attention stack:
///   A_l = softmax((H W_q)(H W_k)^T / sqrt(d)),  H_{l+1} = H_l + A_l (H W_v),
/// with H_0 = z. A frozen random projection maps the final features into the
/// space used by the content loss.
struct ToyModel {
  ToyModelConfig config;
  std::vector<LayerWeights> layers;
  Tensor content_projection;  // (d, d)

  /// Weights drawn from SeededRng(config.seed).
  static ToyModel init(const ToyModelConfig& cfg);
  /// All projections zero (attention rows become uniform).
  static ToyModel zeros(const ToyModelConfig& cfg);

  std::size_t parameter_count() const;
};

struct AttentionMap {
  Tensor weights;  // (n, n), row-stochastic
  bool active = true;
};

struct ForwardTrace {
  std::vector<AttentionMap> attn_maps;
  Tensor features;  // (n, d)

  std::size_t active_layers() const;
};

/// Per-layer intermediates kept for the backward pass.
struct LayerCache {
  Tensor input, query, key, value;
};

struct ForwardResult {
  ForwardTrace trace;
  std::vector<LayerCache> cache;  // empty entries for inactive layers
};

/// Layers whose mask bit is 0 pass features through unchanged and emit a
/// uniform placeholder map flagged inactive.
ForwardResult forward_with_cache(const ToyModel& model, const Tensor& z, const PruneMask* layer_mask = nullptr);
ForwardTrace forward(const ToyModel& model, const Tensor& z, const PruneMask* layer_mask = nullptr);

/// Mean KL(teacher row || student row) over rows and over the student's active
/// layers. The unnormalized sum is this value times active_layers * n.
double distill_loss(const ForwardTrace& teacher, const ForwardTrace& student);

/// mean(((gen - content) P)^2) for the frozen projection P.
double content_loss(const Tensor& gen_features, const Tensor& content_features, const Tensor& projection);

/// distill + lambda_content * content.
double total_loss(double distill, double content, double lambda_content);

struct LossWeights {
  double distill = 1.0;
  double content = 1.0;
};

struct Gradients {
  Tensor latent;                     // d loss / d z
  std::vector<LayerWeights> layers;  // d loss / d weights (zero for inactive layers)
};

struct LossBreakdown {
  double distill = 0.0;
  double content = 0.0;
};

/// Analytic gradient of weights.distill * L_distill + weights.content * L_content
/// with respect to the latent and every layer weight.
struct BackwardResult {
  LossBreakdown losses;
  ForwardTrace trace;
  Gradients grads;
};

BackwardResult backward(const ToyModel& model, const Tensor& z, const ForwardTrace& teacher,
                        const Tensor& content_target, LossWeights weights, const PruneMask* layer_mask = nullptr);

/// d L_total / d z with L_total = L_distill + lambda_content * L_content.
Tensor grad_total(const ToyModel& model, const Tensor& z, const ForwardTrace& teacher, const Tensor& content_target,
                  double lambda_content, const PruneMask* layer_mask = nullptr);

/// Scalar total loss, used by finite-difference checks.
double evaluate_total_loss(const ToyModel& model, const Tensor& z, const ForwardTrace& teacher,
                           const Tensor& content_target, double lambda_content, const PruneMask* layer_mask = nullptr);

/// Golden-file form: {"shape": [...], "data": [...]} with round-trip precision.
nlohmann::json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const nlohmann::json& j);
nlohmann::json trace_to_json(const ForwardTrace& trace);
ForwardTrace trace_from_json(const nlohmann::json& j);

}  // namespace muonad
