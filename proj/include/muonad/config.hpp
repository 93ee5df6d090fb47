#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "muonad/pruning.hpp"
#include "muonad/surgery.hpp"
#include "muonad/testbed.hpp"

namespace muonad {

inline constexpr int kSchemaVersion = 1;

enum class OptimizerKind { Muon, AdamW };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Muon;
  double momentum = 0.95;
  int ns_steps = 5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct SurgeryOptions {
  bool conflict_projection = true;
  bool latent_projection = true;
  SurgeryConfig params;
};

/// Which weight matrices the channel masks apply to.
struct PruneTargets {
  bool query = false;
  bool key = false;
  bool value = true;
};

struct PruningOptions {
  bool entropy_layers = true;
  bool channels = true;
  PruneConfig params;
  double retention_start = 0.95;
  double retention_end = 0.40;
  std::uint64_t remask_every = 50;
  PruneTargets targets;
};

struct CurriculumOptions {
  bool enabled = true;
  std::uint64_t total_iters = 3000;
  double eta_lambda = 0.1;
};

enum class PrecisionMode { Full, Mixed };

/// How the distillation target and the starting latent are built.
///   z_style   ~ N(0, 1)                         (seed + 1)
///   z_content = z_style + content_offset * N(0,1)  (seed + 2)
///   z_0       = z_style + init_noise * N(0,1)      (seed + 3)
/// The teacher trace is the unpruned model evaluated at z_style and the content
/// target is the final feature map at z_content.
struct TaskOptions {
  double init_noise = 0.6;
  double content_offset = 0.2;
  bool train_weights = false;
};

struct GradcheckOptions {
  std::size_t configs = 20;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::size_t max_tokens = 8;
  std::size_t max_dim = 8;
  double corrupt = 0.0;  // added to one analytic entry; negative-control hook
};

struct ExperimentConfig {
  std::string label = "run";
  std::uint64_t seed = 42;
  ToyModelConfig model;
  TaskOptions task;
  OptimizerConfig optimizer;
  SurgeryOptions surgery;
  PruningOptions pruning;
  CurriculumOptions curriculum;
  PrecisionMode precision = PrecisionMode::Full;
  double loss_threshold = 0.05;
  std::uint64_t max_iters = 3000;
  std::uint64_t log_every = 10;
  bool stop_at_threshold = false;
  std::string output_path = "runs";
  GradcheckOptions gradcheck;

  /// Throws muonad::Error naming the offending field.
  void validate() const;
};

/// Strict parse: unknown fields, wrong types and a missing or unsupported
/// schema_version are errors naming the field path.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// Reads and parses a config file. I/O failures throw IoError.
ExperimentConfig load_config(const std::string& path);

/// Sets a dotted field path (e.g. "optimizer.kind") on a config document.
void apply_override(nlohmann::json& doc, const std::string& path, const nlohmann::json& value);

/// Expands {"base": {...}, "matrix": {"a.b": [v1, v2], ...}} into the
/// cartesian product of overrides (first key varies slowest). A document with
/// only "runs": [...] lists the configs directly.
std::vector<ExperimentConfig> expand_bench(const nlohmann::json& j);

std::string to_string(OptimizerKind kind);
std::string to_string(PrecisionMode mode);

}  // namespace muonad
