#include "muonad/muon.hpp"

#include <algorithm>
#include <cmath>

#include "muonad/error.hpp"

namespace muonad {

Tensor newton_schulz_orthogonalize(const Tensor& g, int steps) {
  NsOptions opts;
  opts.steps = steps;
  return newton_schulz_orthogonalize(g, opts);
}

Tensor newton_schulz_orthogonalize(const Tensor& g, const NsOptions& opts) {
  require(g.rank() == 2 && !g.empty(), "newton_schulz_orthogonalize expects a non-empty rank-2 tensor");
  require(opts.steps >= 1, "newton_schulz_orthogonalize: steps must be positive");
  require(g.all_finite(), "newton_schulz_orthogonalize: non-finite input");
  const double norm = frobenius_norm(g);
  require(norm > 0.0, "degenerate gradient");

  const bool tall = g.rows() > g.cols();
  Tensor x = tall ? transpose(g) : g;
  x = (1.0 / norm) * x;

  const auto [a, b, c] = opts.coeffs;
  for (int i = 0; i < opts.steps; ++i) {
    const Tensor gram = matmul_nt(x, x);
    Tensor poly = matmul(gram, gram);
    for (std::size_t k = 0; k < poly.size(); ++k) {
      poly[k] = b * gram[k] + c * poly[k];
    }
    Tensor next = matmul(poly, x);
    axpy(a, x, next);
    x = std::move(next);
  }

  const std::size_t k = x.rows();
  for (int i = 0; i < opts.max_polish_steps; ++i) {
    const Tensor gram = matmul_nt(x, x);
    double resid = 0.0;
    for (std::size_t r = 0; r < k; ++r) {
      for (std::size_t s = 0; s < k; ++s) {
        const double e = gram(r, s) - (r == s ? 1.0 : 0.0);
        resid += e * e;
      }
    }
    if (std::sqrt(resid) <= opts.polish_tol) {
      break;
    }
    Tensor next = matmul(gram, x);
    for (std::size_t q = 0; q < next.size(); ++q) {
      next[q] = 1.5 * x[q] - 0.5 * next[q];
    }
    x = std::move(next);
  }

  return tall ? transpose(x) : x;
}

MuonState MuonState::for_param(const Tensor& param, double momentum_coeff, int ns_steps) {
  require(momentum_coeff >= 0.0 && momentum_coeff < 1.0, "momentum coefficient must lie in [0, 1)");
  require(ns_steps >= 1, "ns_steps must be positive");
  return MuonState{Tensor::zeros(param.shape()), momentum_coeff, 0, ns_steps};
}

double muon_update_scale(const Tensor& param) {
  return 0.2 * std::sqrt(static_cast<double>(std::max(param.rows(), param.cols())));
}

namespace {

void check_step_args(const MuonState& state, const Tensor& param, const Tensor& grad, double lr) {
  require(param.rank() == 2, [&] { return "muon_step expects a rank-2 parameter, got " + shape_str(param.shape()); });
  require(grad.shape() == param.shape(),
          [&] { return "shape mismatch: param " + shape_str(param.shape()) + " vs grad " + shape_str(grad.shape()); });
  require(state.momentum.shape() == param.shape(), "shape mismatch: momentum buffer vs param");
  require(state.momentum_coeff >= 0.0 && state.momentum_coeff < 1.0, "momentum coefficient must lie in [0, 1)");
  require(lr > 0.0 && std::isfinite(lr), "learning rate must be positive");
}

// Advances the momentum buffer and returns its orthogonalized direction, or
// zeros when the buffer is exactly zero.
Tensor orthogonal_direction(MuonState& st, const Tensor& grad) {
  Tensor m = st.momentum_coeff * st.momentum;
  axpy(1.0, grad, m);
  st.momentum = std::move(m);
  st.step_count += 1;
  if (l2_norm(st.momentum) == 0.0) {
    return Tensor::zeros(grad.shape());
  }
  return newton_schulz_orthogonalize(st.momentum, st.ns_steps);
}

}  // namespace

MuonResult muon_step(const MuonState& state, const Tensor& param, const Tensor& grad, double lr) {
  check_step_args(state, param, grad, lr);
  MuonState st = state;
  Tensor delta = (lr * muon_update_scale(param)) * orthogonal_direction(st, grad);
  Tensor next = param - delta;
  return MuonResult{std::move(next), std::move(st), std::move(delta)};
}

MuonResult latent_update(const MuonState& state, const Tensor& z, const Tensor& grad, double lr, double rms_floor) {
  check_step_args(state, z, grad, lr);
  const double z_rms = rms(z);
  require(std::isfinite(z_rms), "latent rms is not finite");
  MuonState st = state;
  Tensor dir = orthogonal_direction(st, grad);
  const double dir_rms = rms(dir);
  Tensor delta = dir_rms > 0.0 ? (lr * std::max(z_rms, rms_floor) / dir_rms) * dir : std::move(dir);
  Tensor next = z - delta;
  return MuonResult{std::move(next), std::move(st), std::move(delta)};
}

AdamWState AdamWState::for_param(const Tensor& param, double weight_decay) {
  AdamWState st;
  st.first_moment = Tensor::zeros(param.shape());
  st.second_moment = Tensor::zeros(param.shape());
  st.weight_decay = weight_decay;
  return st;
}

AdamWResult adamw_step(const AdamWState& state, const Tensor& param, const Tensor& grad, double lr) {
  require(grad.shape() == param.shape(),
          [&] { return "shape mismatch: param " + shape_str(param.shape()) + " vs grad " + shape_str(grad.shape()); });
  require(state.first_moment.shape() == param.shape() && state.second_moment.shape() == param.shape(),
          "shape mismatch: AdamW moments vs param");
  require(lr > 0.0, "learning rate must be positive");
  AdamWState st = state;
  st.step_count += 1;
  const double t = static_cast<double>(st.step_count);
  const double bc1 = 1.0 - std::pow(st.beta1, t);
  const double bc2 = 1.0 - std::pow(st.beta2, t);
  Tensor out = param;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    st.first_moment[i] = st.beta1 * st.first_moment[i] + (1.0 - st.beta1) * g;
    st.second_moment[i] = st.beta2 * st.second_moment[i] + (1.0 - st.beta2) * g * g;
    const double m_hat = st.first_moment[i] / bc1;
    const double v_hat = st.second_moment[i] / bc2;
    out[i] = param[i] - lr * st.weight_decay * param[i] - lr * m_hat / (std::sqrt(v_hat) + st.eps);
  }
  return AdamWResult{std::move(out), std::move(st)};
}

}  // namespace muonad
