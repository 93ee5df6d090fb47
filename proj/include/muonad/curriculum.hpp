#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace muonad {

enum class Phase { I = 1, II = 2, III = 3 };

std::string_view to_string(Phase p);

/// Half-open phase windows: [0,500) I, [500,1500) II, [1500, inf) III.
inline constexpr std::int64_t kPhase2Start = 500;
inline constexpr std::int64_t kPhase3Start = 1500;
inline constexpr double kLambdaStyleInit = 0.8;
inline constexpr double kLambdaMin = 1e-4;
inline constexpr double kLambdaMax = 10.0;
inline constexpr double kLrStart = 0.001;
inline constexpr double kLrEnd = 0.0001;

Phase phase_of(std::int64_t iteration);

/// lambda * exp(-eta * delta_fid), clamped to [1e-4, 10].
double update_lambda_style(double lambda_prev, double delta_fid, double eta_lambda);

/// Coefficient k of the mu + k*sigma mask threshold for each phase.
double mask_k_for_phase(Phase p);

/// Geometric decay 0.001 -> 0.0001 across [0, total_iters].
double lr_schedule(std::uint64_t iteration, std::uint64_t total_iters);

struct CurriculumState {
  std::uint64_t iteration = 0;
  Phase phase = Phase::I;
  double lambda_style = kLambdaStyleInit;
  double eta_lambda = 0.1;
  double lr = kLrStart;
  std::optional<double> last_val_distance;
  std::uint64_t total_iters = 3000;
  bool freeze_style = false;       // Phase III: lambda_style no longer adapts
  bool balance_gradients = false;  // Phase III: |g_style| = gamma |g_content|

  static CurriculumState initial(std::uint64_t total_iters, double eta_lambda = 0.1);

  friend bool operator==(const CurriculumState&, const CurriculumState&) = default;
};

/// Closes the current iteration with its validation distance and advances to
/// the next one. lambda_style adapts only inside Phase II.
CurriculumState step(const CurriculumState& state, double val_distance);

}  // namespace muonad
