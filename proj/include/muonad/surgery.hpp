#pragma once

#include "muonad/tensor.hpp"

namespace muonad {

struct SurgeryConfig {
  double conflict_threshold = -0.5;
  double gamma = 1.0;

  void validate() const;
};

struct ConflictReport {
  double cos_theta = 0.0;
  bool conflicted = false;
  bool projected = false;
};

struct ProjectionResult {
  Tensor gradient;
  ConflictReport report;
};

/// Cosine of the angle between two flattened gradients. Throws
/// "undefined angle" when either norm is zero.
double cos_angle(const Tensor& g1, const Tensor& g2);

/// Removes the component of g_style along g_content when the two conflict
/// (cos < threshold). Non-conflicting inputs are returned untouched.
ProjectionResult project_conflict(const Tensor& g_style, const Tensor& g_content, const SurgeryConfig& cfg = {});

/// (I - z z^T / |z|^2) grad on the flattened tensors.
Tensor latent_project(const Tensor& z, const Tensor& grad);

/// Rescales g_style to norm gamma * |g_content|, keeping its direction.
Tensor balance_magnitudes(const Tensor& g_style, const Tensor& g_content, double gamma);

}  // namespace muonad
