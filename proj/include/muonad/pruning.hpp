#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "muonad/tensor.hpp"

namespace muonad {

struct PruneConfig {
  double beta = 0.7;           // entropy keep ratio
  double k = 0.0;              // threshold coefficient for mu + k*sigma
  double lambda_decay = 0.01;  // weight-magnitude term of the importance score
  double epsilon = 1e-8;
  std::size_t window = 16;     // sliding window of squared gradients
  double importance_threshold = 0.03;

  void validate() const;
};

/// Binary keep (1) / drop (0) decisions.
struct PruneMask {
  std::vector<std::uint8_t> bits;

  std::size_t size() const { return bits.size(); }
  std::size_t count_kept() const;
  bool all_kept() const { return count_kept() == bits.size(); }
  /// Mask as a 0/1 tensor of the given shape.
  Tensor as_tensor(const Shape& shape) const;

  static PruneMask all_ones(std::size_t n) { return PruneMask{std::vector<std::uint8_t>(n, 1)}; }

  friend bool operator==(const PruneMask&, const PruneMask&) = default;
};

struct ImportanceScores {
  Tensor scores;
  std::deque<Tensor> grad_sq_window;  // oldest first
};

/// Mean row entropy of a row-stochastic matrix (natural log).
double attention_entropy(const Tensor& map);

/// bit_i = 1 iff entropies[i] > beta * max(entropies); beta == 1 compares with >=
/// so the maximal layer survives.
PruneMask keep_layers(std::span<const double> entropies, double beta);

/// Pushes grad^2 into the window and rescores:
/// S = |grad| / (sqrt(mean_window(grad^2)) + eps) + lambda_decay * W^2.
ImportanceScores channel_importance(const Tensor& grad, const Tensor& weights, const ImportanceScores& state,
                                    const PruneConfig& cfg);

/// Threshold eta = mean + k * population_stddev; bit = 0 where score < eta.
PruneMask binarize_mask(const Tensor& scores, double k);

/// Linear channel-retention schedule from 0.95 down to 0.40, clamped.
double retention_schedule(std::uint64_t iter, std::uint64_t total_iters);

/// Same linear ramp with an explicit end point.
double retention_schedule(std::uint64_t iter, std::uint64_t total_iters, double start, double end);

/// Keeps exactly ceil(retention * size) entries with the highest scores
/// (ties broken by lower flat index).
PruneMask top_fraction_mask(const Tensor& scores, double retention);

struct MemoryEff {
  double density = 0.0;
  double bytes = 0.0;
};

/// density = nnz(mask .* weight) / total entries;
/// bytes = density * total_entries * (bytes_a + bytes_b).
MemoryEff memory_eff(std::span<const PruneMask> masks, std::span<const Tensor> weights, std::size_t bytes_a,
                     std::size_t bytes_b);

/// JSON form: {"layer": <name>, "bits": [0,1,...]}.
std::string mask_to_json(const std::string& layer, const PruneMask& mask);

}  // namespace muonad
