#include "muonad/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "muonad/error.hpp"

namespace muonad {

void PruneConfig::validate() const {
  require(beta > 0.0 && beta <= 1.0, "pruning.beta must lie in (0, 1]");
  require(epsilon > 0.0, "pruning.epsilon must be positive");
  require(window >= 1, "pruning.window must be at least 1");
  require(lambda_decay >= 0.0, "pruning.lambda_decay must be non-negative");
}

std::size_t PruneMask::count_kept() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

Tensor PruneMask::as_tensor(const Shape& shape) const {
  require(shape_numel(shape) == bits.size(), [&] { return "mask length does not match shape " + shape_str(shape); });
  Tensor t(shape);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    t[i] = bits[i] ? 1.0 : 0.0;
  }
  return t;
}

double attention_entropy(const Tensor& map) {
  require(map.rank() == 2 && !map.empty(), "attention_entropy expects a non-empty rank-2 map");
  double total = 0.0;
  for (std::size_t i = 0; i < map.rows(); ++i) {
    double row_sum = 0.0;
    double h = 0.0;
    for (std::size_t j = 0; j < map.cols(); ++j) {
      const double p = map(i, j);
      require(p >= 0.0, "attention map has negative entries");
      row_sum += p;
      if (p > 0.0) {
        h -= p * std::log(p);
      }
    }
    require(std::abs(row_sum - 1.0) <= 1e-6, [&] { return "attention map row " + std::to_string(i) + " is not stochastic"; });
    total += h;
  }
  return total / static_cast<double>(map.rows());
}

PruneMask keep_layers(std::span<const double> entropies, double beta) {
  require(!entropies.empty(), "keep_layers: empty input");
  require(beta > 0.0 && beta <= 1.0, "keep_layers: beta must lie in (0, 1]");
  const double threshold = beta * *std::max_element(entropies.begin(), entropies.end());
  PruneMask mask;
  mask.bits.reserve(entropies.size());
  for (double h : entropies) {
    const bool keep = beta < 1.0 ? h > threshold : h >= threshold;
    mask.bits.push_back(keep ? 1 : 0);
  }
  return mask;
}

ImportanceScores channel_importance(const Tensor& grad, const Tensor& weights, const ImportanceScores& state,
                                    const PruneConfig& cfg) {
  require(grad.shape() == weights.shape(),
          [&] { return "channel_importance: shape mismatch " + shape_str(grad.shape()) + " vs " + shape_str(weights.shape()); });
  for (const auto& w : state.grad_sq_window) {
    require(w.shape() == grad.shape(), "channel_importance: window entry shape differs from gradient");
  }
  ImportanceScores next = state;
  next.grad_sq_window.push_back(hadamard(grad, grad));
  while (next.grad_sq_window.size() > cfg.window) {
    next.grad_sq_window.pop_front();
  }
  const double inv = 1.0 / static_cast<double>(next.grad_sq_window.size());
  Tensor scores(grad.shape());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    double acc = 0.0;
    for (const auto& w : next.grad_sq_window) {
      acc += w[i];
    }
    scores[i] = std::abs(grad[i]) / (std::sqrt(acc * inv) + cfg.epsilon) + cfg.lambda_decay * weights[i] * weights[i];
  }
  next.scores = std::move(scores);
  return next;
}

PruneMask binarize_mask(const Tensor& scores, double k) {
  require(!scores.empty(), "binarize_mask: empty input");
  const double mu = mean(scores);
  double var = 0.0;
  for (double s : scores.values()) {
    var += (s - mu) * (s - mu);
  }
  const double sigma = std::sqrt(var / static_cast<double>(scores.size()));
  const double eta = mu + k * sigma;
  PruneMask mask;
  mask.bits.reserve(scores.size());
  for (double s : scores.values()) {
    mask.bits.push_back(s < eta ? 0 : 1);
  }
  return mask;
}

double retention_schedule(std::uint64_t iter, std::uint64_t total_iters) {
  return retention_schedule(iter, total_iters, 0.95, 0.40);
}

double retention_schedule(std::uint64_t iter, std::uint64_t total_iters, double start, double end) {
  require(total_iters > 0, "retention_schedule: total_iters must be positive");
  if (iter >= total_iters) {
    return end;
  }
  if (iter == 0) {
    return start;
  }
  const double frac = static_cast<double>(iter) / static_cast<double>(total_iters);
  const double r = start + (end - start) * frac;
  return std::clamp(r, std::min(start, end), std::max(start, end));
}

PruneMask top_fraction_mask(const Tensor& scores, double retention) {
  require(!scores.empty(), "top_fraction_mask: empty input");
  require(retention >= 0.0 && retention <= 1.0, "top_fraction_mask: retention must lie in [0, 1]");
  const auto n = scores.size();
  const auto keep = static_cast<std::size_t>(std::ceil(retention * static_cast<double>(n) - 1e-9));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  PruneMask mask{std::vector<std::uint8_t>(n, 0)};
  for (std::size_t i = 0; i < std::min(keep, n); ++i) {
    mask.bits[order[i]] = 1;
  }
  return mask;
}

MemoryEff memory_eff(std::span<const PruneMask> masks, std::span<const Tensor> weights, std::size_t bytes_a,
                     std::size_t bytes_b) {
  require(masks.size() == weights.size(), "memory_eff: mask/weight count mismatch");
  require(bytes_a > 0 && bytes_b > 0, "memory_eff: byte sizes must be positive");
  std::size_t nonzero = 0;
  std::size_t total = 0;
  for (std::size_t l = 0; l < masks.size(); ++l) {
    require(masks[l].size() == weights[l].size(), [&] { return "memory_eff: mask " + std::to_string(l) + " does not match its weight"; });
    for (std::size_t i = 0; i < weights[l].size(); ++i) {
      if (masks[l].bits[i] != 0 && weights[l][i] != 0.0) {
        ++nonzero;
      }
    }
    total += weights[l].size();
  }
  require(total > 0, "memory_eff: no weights");
  MemoryEff out;
  out.density = static_cast<double>(nonzero) / static_cast<double>(total);
  out.bytes = out.density * static_cast<double>(total) * static_cast<double>(bytes_a + bytes_b);
  return out;
}

std::string mask_to_json(const std::string& layer, const PruneMask& mask) {
  nlohmann::json j;
  j["layer"] = layer;
  j["bits"] = mask.bits;
  return j.dump();
}

}  // namespace muonad
