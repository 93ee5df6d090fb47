#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "muonad/config.hpp"
#include "muonad/error.hpp"
#include "muonad/harness.hpp"
#include "muonad/rng.hpp"
#include "muonad/trainer.hpp"

namespace {

using muonad::ExperimentConfig;
using nlohmann::json;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "both";
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config file");
  cmd->add_option("--seed", f.seed, "seed (overrides the config)");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--format", f.format, "json, csv or both")->check(CLI::IsMember({"json", "csv", "both"}));
}

ExperimentConfig load(const CommonFlags& f) {
  ExperimentConfig cfg = f.config_path.empty() ? ExperimentConfig{} : muonad::load_config(f.config_path);
  if (f.seed) {
    cfg.seed = *f.seed;
    cfg.model.seed = *f.seed;
  }
  return cfg;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text) || (out.close(), !out)) {
    throw muonad::IoError("cannot write '" + path.string() + "'");
  }
}

int cmd_train(const CommonFlags& f) {
  const ExperimentConfig cfg = load(f);
  const muonad::RunRecord rec = muonad::run_train(cfg);
  const std::string dir = f.out.empty() ? cfg.output_path : f.out;
  muonad::write_run(rec, cfg, dir, muonad::parse_format(f.format));
  const auto& s = rec.summary;
  std::cout << "label " << rec.label << "\n"
            << "iterations_run " << s.iterations_run << "\n"
            << "iterations_to_threshold "
            << (s.iterations_to_threshold ? std::to_string(*s.iterations_to_threshold) : std::string("none")) << "\n"
            << "final_distill " << muonad::format_real(s.final_distill) << "\n"
            << "final_density " << muonad::format_real(s.final_density) << "\n"
            << "output " << dir << "\n";
  return muonad::kExitOk;
}

int cmd_gradcheck(const CommonFlags& f, std::optional<double> corrupt) {
  ExperimentConfig cfg = load(f);
  if (corrupt) {
    cfg.gradcheck.corrupt = *corrupt;
  }
  const muonad::GradcheckReport rep = muonad::run_gradcheck(cfg);
  json cases = json::array();
  for (const auto& c : rep.cases) {
    cases.push_back({{"num_layers", c.num_layers},
                     {"token_count", c.token_count},
                     {"embed_dim", c.embed_dim},
                     {"lambda_content", c.lambda_content},
                     {"max_rel_error", c.max_rel_error}});
  }
  std::cout << "max_rel_error " << muonad::format_real(rep.max_rel_error) << " tolerance "
            << muonad::format_real(rep.tolerance) << " " << (rep.passed() ? "ok" : "FAILED") << "\n";
  if (!f.out.empty()) {
    const json doc{{"rng", std::string(muonad::SeededRng::kAlgorithm)},
                   {"max_rel_error", rep.max_rel_error},
                   {"tolerance", rep.tolerance},
                   {"passed", rep.passed()},
                   {"cases", cases}};
    write_text(std::filesystem::path(f.out) / "gradcheck.json", doc.dump(2) + "\n");
  }
  return rep.passed() ? muonad::kExitOk : muonad::kExitFailure;
}

int cmd_bench(const CommonFlags& f) {
  if (f.config_path.empty()) {
    throw muonad::Error("bench needs --config <bench.json>");
  }
  std::ifstream in(f.config_path, std::ios::binary);
  if (!in) {
    throw muonad::IoError("cannot open '" + f.config_path + "'");
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw muonad::Error("malformed JSON in '" + f.config_path + "' at byte " + std::to_string(e.byte > 0 ? e.byte - 1 : 0));
  }
  std::vector<ExperimentConfig> configs = muonad::expand_bench(doc);
  if (f.seed) {
    for (auto& c : configs) {
      c.seed = *f.seed;
      c.model.seed = *f.seed;
    }
  }
  const std::size_t threads = muonad::bench_threads(configs.size());
  const auto rows = muonad::run_bench(configs, threads);
  const std::string csv = muonad::bench_to_csv(rows);
  std::cout << csv;
  if (!f.out.empty()) {
    const auto fmt = muonad::parse_format(f.format);
    if (fmt != muonad::OutputFormat::Json) {
      write_text(std::filesystem::path(f.out) / "bench.csv", csv);
    }
    if (fmt != muonad::OutputFormat::Csv) {
      json doc{{"rng", std::string(muonad::SeededRng::kAlgorithm)}, {"runs", json::array()}};
      json& arr = doc["runs"];
      for (const auto& r : rows) {
        arr.push_back({{"label", r.label},
                       {"ok", r.ok},
                       {"error", r.error},
                       {"iterations_to_threshold",
                        r.iterations_to_threshold ? json(*r.iterations_to_threshold) : json(nullptr)},
                       {"final_distill", r.final_distill},
                       {"final_content", r.final_content},
                       {"final_total", r.final_total},
                       {"density", r.density},
                       {"wall_time", r.wall_time}});
      }
      write_text(std::filesystem::path(f.out) / "bench.json", doc.dump(2) + "\n");
    }
  }
  bool all_ok = true;
  for (const auto& r : rows) {
    if (!r.ok) {
      std::cerr << "run '" << r.label << "' failed: " << r.error << "\n";
      all_ok = false;
    }
  }
  return all_ok ? muonad::kExitOk : muonad::kExitFailure;
}

int cmd_metrics(const std::string& gen, const std::string& gt, const muonad::MetricsOptions& opts,
                const std::string& out) {
  const json report = muonad::run_metrics(gen, gt, opts);
  std::cout << report.dump(2) << "\n";
  if (!out.empty()) {
    write_text(std::filesystem::path(out) / "metrics.json", report.dump(2) + "\n");
  }
  return muonad::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"muonad: toy attention distillation with Muon updates"};
  app.require_subcommand(1);

  CommonFlags train_flags, grad_flags, bench_flags;
  auto* train = app.add_subcommand("train", "run one training job and write run.csv / run.json");
  add_common(train, train_flags);

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the analytic gradients");
  add_common(gradcheck, grad_flags);
  std::optional<double> corrupt;
  gradcheck->add_option("--corrupt", corrupt, "perturb one analytic gradient entry (negative control)");

  auto* bench = app.add_subcommand("bench", "run a config matrix and print one CSV row per run");
  add_common(bench, bench_flags);

  auto* metrics = app.add_subcommand("metrics", "SSIM / MCR / ADF / Frechet between two asset files");
  std::string gen_path, gt_path, metrics_out, metrics_format = "json";
  muonad::MetricsOptions mopts;
  metrics->add_option("--gen", gen_path, "generated asset (graymap or JSON)")->required();
  metrics->add_option("--gt", gt_path, "reference asset (graymap or JSON)")->required();
  metrics->add_option("--tau", mopts.tau, "MCR threshold");
  metrics->add_option("--level", mopts.levels, "MCR mip levels")->expected(1, -1);
  metrics->add_option("--angle", mopts.angles, "ADF angles in degrees")->expected(1, -1);
  metrics->add_option("--window", mopts.window, "SSIM window");
  metrics->add_option("--out", metrics_out, "output directory");
  metrics->add_option("--format", metrics_format, "json")->check(CLI::IsMember({"json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? muonad::kExitOk : muonad::kExitInvalidInput;
  }

  try {
    if (train->parsed()) return cmd_train(train_flags);
    if (gradcheck->parsed()) return cmd_gradcheck(grad_flags, corrupt);
    if (bench->parsed()) return cmd_bench(bench_flags);
    if (metrics->parsed()) return cmd_metrics(gen_path, gt_path, mopts, metrics_out);
  } catch (const muonad::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return muonad::kExitIoFailure;
  } catch (const muonad::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return muonad::kExitInvalidInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return muonad::kExitInvalidInput;
  }
  return muonad::kExitInvalidInput;
}
