#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "muonad/config.hpp"
#include "muonad/trainer.hpp"

namespace muonad {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitInvalidInput = 2, kExitIoFailure = 3 };

enum class OutputFormat { Json, Csv, Both };
OutputFormat parse_format(const std::string& s);

/// Writes <dir>/run.csv and/or <dir>/run.json, creating dir if needed.
void write_run(const RunRecord& rec, const ExperimentConfig& cfg, const std::string& dir, OutputFormat fmt);

/// Drops the trailing wall_time column from a CSV produced by rows_to_csv.
std::string strip_wall_time(const std::string& csv);

struct GradcheckCase {
  std::size_t num_layers = 0, token_count = 0, embed_dim = 0;
  double lambda_content = 0.0;
  double max_rel_error = 0.0;  // over the latent and every weight entry
};

struct GradcheckReport {
  std::vector<GradcheckCase> cases;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return max_rel_error <= tolerance; }
};

/// Relative error used by the gradient check: |a - f| / max(|a|, |f|, 1e-6).
double gradcheck_rel_error(double analytic, double numeric);

/// Central differences against the analytic backward pass on
/// cfg.gradcheck.configs random models drawn from cfg.seed.
GradcheckReport run_gradcheck(const ExperimentConfig& cfg);

struct BenchRow {
  std::string label;
  bool ok = true;
  std::string error;
  std::optional<std::uint64_t> iterations_to_threshold;
  double final_distill = 0.0;
  double final_content = 0.0;
  double final_total = 0.0;
  double density = 1.0;
  double wall_time = 0.0;
};

/// Threads used for a bench of `jobs` runs: hardware concurrency, capped by
/// MUONAD_THREADS when set to a positive integer.
std::size_t bench_threads(std::size_t jobs);

/// Runs every config (in parallel up to `threads`); rows keep submission order.
std::vector<BenchRow> run_bench(const std::vector<ExperimentConfig>& configs, std::size_t threads);
std::string bench_to_csv(const std::vector<BenchRow>& rows);

struct MetricsOptions {
  double tau = 0.05;
  std::vector<int> levels = {1, 2, 3, 4};
  std::vector<double> angles = {0.0, 45.0, 90.0};
  int window = 11;
};

/// Reads two asset files and reports SSIM, MCR per level and mean, ADF and,
/// when both files carry features, the Frechet distance.
nlohmann::json run_metrics(const std::string& gen_path, const std::string& gt_path, const MetricsOptions& opts);

}  // namespace muonad
