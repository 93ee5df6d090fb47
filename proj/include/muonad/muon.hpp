#pragma once

#include <cstdint>

#include "muonad/tensor.hpp"

namespace muonad {

/// Coefficients of the quintic Newton-Schulz warm-up iteration.
struct NsCoefficients {
  double a = 3.4445;
  double b = -4.7750;
  double c = 2.0315;
};

struct NsOptions {
  int steps = 5;
  NsCoefficients coeffs{};
  /// Cubic polish iterations X <- 1.5 X - 0.5 (X X^T) X run after the quintic
  /// warm-up until ||X X^T - I||_F <= polish_tol. Zero disables the polish.
  int max_polish_steps = 40;
  double polish_tol = 1e-13;
};

/// Nearest semi-orthogonal factor U V^T of g = U S V^T.
///
/// The input is pre-normalized by its Frobenius norm and tall inputs are
/// handled through their transpose so the Gram products stay min_dim square.
/// The quintic warm-up inflates small singular values quickly but only lands
/// them in a band around 1; the cubic polish converges quadratically from
/// there, which makes U V^T a genuine fixed point.
Tensor newton_schulz_orthogonalize(const Tensor& g, int steps = 5);
Tensor newton_schulz_orthogonalize(const Tensor& g, const NsOptions& opts);

struct MuonState {
  Tensor momentum;
  double momentum_coeff = 0.95;
  std::uint64_t step_count = 0;
  int ns_steps = 5;

  static MuonState for_param(const Tensor& param, double momentum_coeff = 0.95, int ns_steps = 5);
};

struct MuonResult {
  Tensor param;
  MuonState state;
  Tensor delta;  // param_new = param_old - delta
};

/// 0.2 * sqrt(max(rows, cols)): keeps update RMS close to lr for any shape.
double muon_update_scale(const Tensor& param);

MuonResult muon_step(const MuonState& state, const Tensor& param, const Tensor& grad, double lr);

inline constexpr double kLatentRmsFloor = 1e-3;

/// Muon step for the latent: the orthogonalized update is rescaled so that
/// rms(delta) == lr * max(rms(z), rms_floor).
MuonResult latent_update(const MuonState& state, const Tensor& z, const Tensor& grad, double lr,
                         double rms_floor = kLatentRmsFloor);

struct AdamWState {
  Tensor first_moment;
  Tensor second_moment;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  std::uint64_t step_count = 0;

  static AdamWState for_param(const Tensor& param, double weight_decay = 0.01);
};

struct AdamWResult {
  Tensor param;
  AdamWState state;
};

/// Bias-corrected Adam with decoupled weight decay.
AdamWResult adamw_step(const AdamWState& state, const Tensor& param, const Tensor& grad, double lr);

}  // namespace muonad
