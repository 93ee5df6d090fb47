#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "muonad/config.hpp"
#include "muonad/curriculum.hpp"
#include "muonad/error.hpp"
#include "muonad/harness.hpp"
#include "muonad/trainer.hpp"

using namespace muonad;

namespace {

ExperimentConfig short_run(std::uint64_t iters) {
  ExperimentConfig cfg;
  cfg.max_iters = iters;
  cfg.log_every = 1;
  return cfg;
}

std::vector<std::vector<std::string>> csv_cells(const std::string& text) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    out.push_back(cells);
  }
  return out;
}

}  // namespace

TEST(Gradcheck, RelativeErrorFloor) {
  EXPECT_EQ(gradcheck_rel_error(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(gradcheck_rel_error(2.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(gradcheck_rel_error(1e-9, 0.0), 1e-3);
}

TEST(Gradcheck, DefaultPasses) {
  ExperimentConfig cfg;
  const GradcheckReport rep = run_gradcheck(cfg);
  EXPECT_EQ(rep.cases.size(), 20u);
  EXPECT_TRUE(rep.passed()) << rep.max_rel_error;
  for (const auto& c : rep.cases) {
    EXPECT_GE(c.num_layers, 1u);
    EXPECT_LE(c.token_count, 8u);
    EXPECT_LE(c.embed_dim, 8u);
  }
}

TEST(Gradcheck, CorruptionIsCaught) {
  ExperimentConfig cfg;
  cfg.gradcheck.configs = 3;
  cfg.gradcheck.corrupt = 1e-3;
  EXPECT_FALSE(run_gradcheck(cfg).passed());
}

TEST(Gradcheck, SmallestModel) {
  ExperimentConfig cfg;
  cfg.gradcheck.configs = 5;
  cfg.gradcheck.max_tokens = 2;
  cfg.gradcheck.max_dim = 2;
  const GradcheckReport rep = run_gradcheck(cfg);
  EXPECT_TRUE(rep.passed()) << rep.max_rel_error;
  for (const auto& c : rep.cases) {
    EXPECT_EQ(c.token_count, 2u);
    EXPECT_EQ(c.embed_dim, 2u);
  }
}

TEST(Gradcheck, RejectsLargeSizes) {
  ExperimentConfig cfg;
  cfg.gradcheck.max_dim = 9;
  EXPECT_THROW(run_gradcheck(cfg), Error);
}

TEST(Format, ParseFormat) {
  EXPECT_EQ(parse_format("json"), OutputFormat::Json);
  EXPECT_EQ(parse_format("csv"), OutputFormat::Csv);
  EXPECT_EQ(parse_format("both"), OutputFormat::Both);
  EXPECT_THROW(parse_format("xml"), Error);
}

TEST(Format, StripWallTime) {
  EXPECT_EQ(strip_wall_time("# rng x\na,b,wall_time\n1,2,0.5\n"), "# rng x\na,b\n1,2\n");
}

TEST(Bench, ThreadsHonourEnvCap) {
  ::setenv("MUONAD_THREADS", "1", 1);
  EXPECT_EQ(bench_threads(8), 1u);
  ::setenv("MUONAD_THREADS", "junk", 1);
  EXPECT_GE(bench_threads(8), 1u);
  EXPECT_EQ(bench_threads(1), 1u);
  ::unsetenv("MUONAD_THREADS");
}

TEST(Bench, MatrixRowsAndDensityOrdering) {
  const nlohmann::json doc = {
      {"base", {{"schema_version", 1}, {"label", "m"}, {"max_iters", 120}, {"log_every", 50}}},
      {"matrix", {{"optimizer.kind", {"muon", "adamw"}}, {"pruning.channels", {true, false}}}}};
  const auto cfgs = expand_bench(doc);
  ASSERT_EQ(cfgs.size(), 4u);
  const auto rows = run_bench(cfgs, 2);
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_TRUE(rows[i].ok) << rows[i].error;
    EXPECT_EQ(rows[i].label, cfgs[i].label);
  }
  EXPECT_LT(rows[0].density, 1.0);
  EXPECT_EQ(rows[1].density, 1.0);
  EXPECT_LT(rows[2].density, 1.0);
  EXPECT_EQ(rows[3].density, 1.0);
  const auto cells = csv_cells(bench_to_csv(rows));
  EXPECT_EQ(cells.size(), 5u);
  EXPECT_EQ(cells[0].back(), "wall_time");
}

TEST(Bench, DuplicateConfigsAgree) {
  ExperimentConfig cfg = short_run(80);
  const auto rows = run_bench({cfg, cfg, cfg}, 3);
  const std::string csv = strip_wall_time(bench_to_csv(rows));
  const auto cells = csv_cells(csv);
  ASSERT_EQ(cells.size(), 4u);
  EXPECT_EQ(cells[1], cells[2]);
  EXPECT_EQ(cells[1], cells[3]);
}

TEST(Bench, FailedRunReported) {
  ExperimentConfig bad = short_run(5);
  bad.model.embed_dim = 0;
  const auto rows = run_bench({bad}, 1);
  EXPECT_FALSE(rows[0].ok);
  EXPECT_FALSE(rows[0].error.empty());
}

TEST(Train, Deterministic) {
  const ExperimentConfig cfg = short_run(150);
  const RunRecord a = run_train(cfg), b = run_train(cfg);
  EXPECT_EQ(strip_wall_time(rows_to_csv(a.rows)), strip_wall_time(rows_to_csv(b.rows)));
  EXPECT_EQ(a.val_distances, b.val_distances);
  EXPECT_EQ(a.masks, b.masks);
}

TEST(Train, SeedChangesTrajectory) {
  ExperimentConfig a = short_run(20), b = short_run(20);
  b.seed = 43;
  b.model.seed = 43;
  EXPECT_NE(strip_wall_time(rows_to_csv(run_train(a).rows)), strip_wall_time(rows_to_csv(run_train(b).rows)));
}

TEST(Train, LatentStepsStayOrthogonal) {
  const RunRecord rec = run_train(short_run(200));
  for (const auto& r : rec.rows) {
    ASSERT_LE(r.latent_alignment, 1e-10) << r.iteration;
    ASSERT_GE(r.kept_layers, 1u);
    ASSERT_LE(r.kept_layers, 6u);
    ASSERT_GT(r.density, 0.0);
    ASSERT_LE(r.density, 1.0);
  }
}

TEST(Train, TaskSetupSeeds) {
  ExperimentConfig cfg;
  const TaskSetup a = make_task(cfg), b = make_task(cfg);
  EXPECT_EQ(a.z_init, b.z_init);
  EXPECT_EQ(a.model.layers[0].query, b.model.layers[0].query);
  EXPECT_NE(a.z_style, a.z_init);
  EXPECT_NE(a.z_style, a.z_content);
  EXPECT_EQ(a.teacher.features, forward(a.model, a.z_style).features);
}

TEST(Train, CurriculumReplay) {
  ExperimentConfig cfg = short_run(700);
  cfg.curriculum.total_iters = 700;
  const RunRecord rec = run_train(cfg);
  ASSERT_EQ(rec.val_distances.size(), 700u);
  ASSERT_EQ(rec.rows.size(), 700u);
  CurriculumState s = CurriculumState::initial(700, cfg.curriculum.eta_lambda);
  for (std::size_t t = 0; t < 700; ++t) {
    ASSERT_EQ(rec.rows[t].lambda_style, s.lambda_style) << t;
    ASSERT_EQ(rec.rows[t].lr, s.lr) << t;
    ASSERT_EQ(rec.rows[t].phase, phase_of(static_cast<std::int64_t>(t)));
    s = step(s, rec.val_distances[t]);
  }
  EXPECT_EQ(rec.rows[0].lambda_style, 0.8);
  EXPECT_EQ(rec.rows[499].lambda_style, 0.8);
}

TEST(Train, CurriculumDisabledKeepsScheduleAndLambda) {
  ExperimentConfig cfg = short_run(30);
  cfg.curriculum.enabled = false;
  cfg.curriculum.total_iters = 30;
  const RunRecord rec = run_train(cfg);
  for (const auto& r : rec.rows) {
    ASSERT_EQ(r.lambda_style, 0.8);
    ASSERT_DOUBLE_EQ(r.lr, lr_schedule(r.iteration, 30));
  }
  EXPECT_TRUE(rec.curriculum_snapshots.empty());
}

TEST(Train, StopAtThreshold) {
  ExperimentConfig cfg = short_run(3000);
  cfg.loss_threshold = 1.0;
  cfg.stop_at_threshold = true;
  const RunRecord rec = run_train(cfg);
  ASSERT_TRUE(rec.summary.iterations_to_threshold.has_value());
  EXPECT_EQ(rec.summary.iterations_run, *rec.summary.iterations_to_threshold + 1);
  EXPECT_LE(rec.rows.back().distill, 1.0);
}

TEST(Train, MatchesAdamwGoldenTrajectory) {
  const std::string dir = MUONAD_FIXTURE_DIR;
  const ExperimentConfig cfg = load_config(dir + "/adamw_golden.json");
  std::ifstream in(dir + "/adamw_golden.csv");
  std::stringstream buf;
  buf << in.rdbuf();
  const auto want = csv_cells(buf.str());
  const auto got = csv_cells(strip_wall_time(rows_to_csv(run_train(cfg).rows)));
  ASSERT_EQ(got.size(), want.size());
  ASSERT_EQ(got[0], want[0]);
  for (std::size_t r = 1; r < got.size(); ++r) {
    ASSERT_EQ(got[r].size(), want[r].size());
    for (std::size_t c = 0; c < got[r].size(); ++c) {
      char* end = nullptr;
      const double w = std::strtod(want[r][c].c_str(), &end);
      if (*end != '\0') {
        ASSERT_EQ(got[r][c], want[r][c]);
        continue;
      }
      const double g = std::strtod(got[r][c].c_str(), nullptr);
      ASSERT_LE(std::abs(g - w), 1e-12 * std::max(1.0, std::abs(w))) << "row " << r << " col " << want[0][c];
    }
  }
}

TEST(WriteRun, CreatesFilesAndReportsIoErrors) {
  const RunRecord rec = run_train(short_run(3));
  const auto dir = std::filesystem::temp_directory_path() / "muonad_write_run";
  std::filesystem::remove_all(dir);
  write_run(rec, ExperimentConfig{}, dir.string(), OutputFormat::Both);
  EXPECT_TRUE(std::filesystem::exists(dir / "run.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "run.json"));
  {
    std::ofstream(dir / "blocker") << "x";
  }
  EXPECT_THROW(write_run(rec, ExperimentConfig{}, (dir / "blocker" / "sub").string(), OutputFormat::Csv), IoError);
  std::filesystem::remove_all(dir);
}
