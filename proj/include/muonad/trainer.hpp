#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "muonad/config.hpp"
#include "muonad/curriculum.hpp"
#include "muonad/testbed.hpp"

namespace muonad {

struct LogRow {
  std::uint64_t iteration = 0;
  Phase phase = Phase::I;
  double distill = 0.0;
  double content = 0.0;
  double total = 0.0;
  double lambda_style = 0.0;
  double lr = 0.0;
  std::size_t kept_layers = 0;
  double density = 1.0;
  double cos_theta = 0.0;
  bool projected = false;
  std::uint64_t peak_memory = 0;
  double val_distance = 0.0;
  double latent_alignment = 0.0;  // |<z, g>| / (|z| |g|) for the gradient handed to the optimizer
  double wall_time = 0.0;         // seconds since run start; not deterministic
};

struct RunSummary {
  std::optional<std::uint64_t> iterations_to_threshold;
  std::uint64_t iterations_run = 0;
  double final_distill = 0.0;
  double final_content = 0.0;
  double final_total = 0.0;
  double final_density = 1.0;
  std::size_t final_kept_layers = 0;
  double frechet_distance = 0.0;
  double ssim_vs_teacher_render = 0.0;
  double max_latent_alignment = 0.0;
  std::uint64_t peak_memory = 0;
  double wall_time = 0.0;
};

struct RunRecord {
  std::string label;
  std::vector<LogRow> rows;
  RunSummary summary;
  nlohmann::json curriculum_snapshots = nlohmann::json::array();
  nlohmann::json masks = nlohmann::json::array();
  /// Validation distance handed to the curriculum at every iteration (not only
  /// logged ones); kept for replay checks, not serialized.
  std::vector<double> val_distances;
};

/// Per-iteration order: (1) curriculum phase/lr/lambda, (2) forward under the
/// current layer and channel masks, (3) style and content gradients,
/// (4) conflict surgery and Phase III magnitude balancing, (5) latent
/// orthogonal projection, (6) optimizer update, (7) re-masking every
/// remask_every iterations, (8) validation distance, curriculum step, logging.
RunRecord run_train(const ExperimentConfig& cfg);

/// Everything a run starts from, derived from the config seed.
struct TaskSetup {
  ToyModel model;
  Tensor z_style;
  Tensor z_content;
  Tensor z_init;
  ForwardTrace teacher;
  Tensor content_target;
};
TaskSetup make_task(const ExperimentConfig& cfg);

/// Attention maps stacked vertically, each entry blown up to a square block so
/// every map is at least min_side pixels across.
Tensor render_trace(const ForwardTrace& trace, std::size_t min_side = 16);

/// Comma-separated, header row, 17 significant digits, LF endings. The
/// wall_time column is last so it can be dropped for comparisons.
std::string rows_to_csv(const std::vector<LogRow>& rows);
nlohmann::json record_to_json(const RunRecord& rec, const ExperimentConfig& cfg);

std::string format_real(double v);

}  // namespace muonad
