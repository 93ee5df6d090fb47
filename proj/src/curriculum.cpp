#include "muonad/curriculum.hpp"

#include <algorithm>
#include <cmath>

#include "muonad/error.hpp"

namespace muonad {

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::I:
      return "I";
    case Phase::II:
      return "II";
    case Phase::III:
      return "III";
  }
  return "?";
}

Phase phase_of(std::int64_t iteration) {
  require(iteration >= 0, "phase_of: negative iteration");
  if (iteration < kPhase2Start) {
    return Phase::I;
  }
  if (iteration < kPhase3Start) {
    return Phase::II;
  }
  return Phase::III;
}

double update_lambda_style(double lambda_prev, double delta_fid, double eta_lambda) {
  require(lambda_prev > 0.0, "update_lambda_style: lambda must be positive");
  require(eta_lambda > 0.0, "update_lambda_style: eta must be positive");
  return std::clamp(lambda_prev * std::exp(-eta_lambda * delta_fid), kLambdaMin, kLambdaMax);
}

double mask_k_for_phase(Phase p) {
  switch (p) {
    case Phase::I:
      return -1.5;
    case Phase::II:
      return 0.5;
    case Phase::III:
      return 1.2;
  }
  return 0.0;
}

double lr_schedule(std::uint64_t iteration, std::uint64_t total_iters) {
  require(total_iters > 0, "lr_schedule: total_iters must be positive");
  require(iteration <= total_iters, "lr_schedule: iteration beyond total_iters");
  if (iteration == 0) {
    return kLrStart;
  }
  if (iteration == total_iters) {
    return kLrEnd;
  }
  const double frac = static_cast<double>(iteration) / static_cast<double>(total_iters);
  return kLrStart * std::pow(kLrEnd / kLrStart, frac);
}

CurriculumState CurriculumState::initial(std::uint64_t total_iters, double eta_lambda) {
  require(total_iters > 0, "curriculum.total_iters must be positive");
  require(eta_lambda > 0.0, "curriculum.eta_lambda must be positive");
  CurriculumState s;
  s.total_iters = total_iters;
  s.eta_lambda = eta_lambda;
  s.lr = lr_schedule(0, total_iters);
  return s;
}

CurriculumState step(const CurriculumState& state, double val_distance) {
  CurriculumState next = state;
  next.iteration = state.iteration + 1;
  next.phase = phase_of(static_cast<std::int64_t>(next.iteration));
  next.lr = lr_schedule(std::min(next.iteration, next.total_iters), next.total_iters);
  switch (next.phase) {
    case Phase::I:
      next.lambda_style = kLambdaStyleInit;
      break;
    case Phase::II:
      if (state.last_val_distance) {
        next.lambda_style = update_lambda_style(state.lambda_style, val_distance - *state.last_val_distance,
                                                state.eta_lambda);
      }
      break;
    case Phase::III:
      break;
  }
  next.freeze_style = next.phase == Phase::III;
  next.balance_gradients = next.phase == Phase::III;
  next.last_val_distance = val_distance;
  return next;
}

}  // namespace muonad
