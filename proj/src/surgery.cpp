#include "muonad/surgery.hpp"

#include <algorithm>
#include <cmath>

#include "muonad/error.hpp"

namespace muonad {

void SurgeryConfig::validate() const {
  require(conflict_threshold >= -1.0 && conflict_threshold <= 0.0, "surgery.conflict_threshold must lie in [-1, 0]");
  require(gamma > 0.0, "surgery.gamma must be positive");
}

double cos_angle(const Tensor& g1, const Tensor& g2) {
  require(g1.shape() == g2.shape(), [&] { return "cos_angle: shape mismatch " + shape_str(g1.shape()) + " vs " + shape_str(g2.shape()); });
  const double n1 = l2_norm(g1);
  const double n2 = l2_norm(g2);
  require(n1 > 0.0 && n2 > 0.0, "undefined angle");
  return std::clamp(dot(g1, g2) / (n1 * n2), -1.0, 1.0);
}

ProjectionResult project_conflict(const Tensor& g_style, const Tensor& g_content, const SurgeryConfig& cfg) {
  require(g_style.shape() == g_content.shape(),
          [&] { return "project_conflict: shape mismatch " + shape_str(g_style.shape()) + " vs " + shape_str(g_content.shape()); });
  const double content_sq = dot(g_content, g_content);
  require(content_sq > 0.0, "project_conflict: zero content gradient");

  ProjectionResult out{g_style, {}};
  if (l2_norm(g_style) == 0.0) {
    return out;  // nothing to project; angle undefined but no conflict possible
  }
  out.report.cos_theta = cos_angle(g_style, g_content);
  out.report.conflicted = out.report.cos_theta < cfg.conflict_threshold;
  if (!out.report.conflicted) {
    return out;
  }
  axpy(-dot(g_style, g_content) / content_sq, g_content, out.gradient);
  // One re-orthogonalization pass removes the rounding residue left by the
  // first subtraction when |g_style| >> |g_content|.
  axpy(-dot(out.gradient, g_content) / content_sq, g_content, out.gradient);
  out.report.projected = true;
  return out;
}

Tensor latent_project(const Tensor& z, const Tensor& grad) {
  require(z.size() == grad.size(), [&] { return "latent_project: length mismatch " + shape_str(z.shape()) + " vs " + shape_str(grad.shape()); });
  const double zz = dot(z, z);
  require(zz > 0.0, "degenerate latent");
  Tensor out = grad;
  const Tensor zr = z.reshaped(grad.shape());
  axpy(-dot(zr, out) / zz, zr, out);
  axpy(-dot(zr, out) / zz, zr, out);
  return out;
}

Tensor balance_magnitudes(const Tensor& g_style, const Tensor& g_content, double gamma) {
  require(g_style.shape() == g_content.shape(), "balance_magnitudes: shape mismatch");
  require(gamma > 0.0, "balance_magnitudes: gamma must be positive");
  const double target = gamma * l2_norm(g_content);
  if (target == 0.0) {
    return Tensor::zeros(g_style.shape());
  }
  const double current = l2_norm(g_style);
  require(current > 0.0, "cannot orient zero gradient");
  return (target / current) * g_style;
}

}  // namespace muonad
