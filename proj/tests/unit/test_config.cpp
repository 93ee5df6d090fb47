#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "muonad/config.hpp"
#include "muonad/error.hpp"

using namespace muonad;
using nlohmann::json;

namespace {

std::string error_of(const json& j) {
  try {
    config_from_json(j);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, MinimalDocumentGivesDefaults) {
  const ExperimentConfig cfg = config_from_json(json{{"schema_version", 1}});
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.model.seed, 42u);
  EXPECT_EQ(cfg.optimizer.kind, OptimizerKind::Muon);
  EXPECT_TRUE(cfg.curriculum.enabled);
  EXPECT_EQ(cfg.max_iters, 3000u);
  EXPECT_EQ(cfg.pruning.retention_end, 0.40);
}

TEST(Config, RoundTrip) {
  ExperimentConfig cfg;
  cfg.seed = 9;
  cfg.optimizer.kind = OptimizerKind::AdamW;
  cfg.pruning.targets = {true, false, true};
  cfg.precision = PrecisionMode::Mixed;
  cfg.label = "rt";
  const json j = config_to_json(cfg);
  const ExperimentConfig back = config_from_json(j);
  EXPECT_EQ(config_to_json(back), j);
  EXPECT_EQ(back.model.seed, 9u);
}

TEST(Config, SchemaVersionRequired) {
  EXPECT_EQ(error_of(json::object()), "missing field 'schema_version'");
  EXPECT_NE(error_of(json{{"schema_version", 2}}).find("schema_version"), std::string::npos);
  EXPECT_NE(error_of(json{{"schema_version", "1"}}).find("schema_version"), std::string::npos);
}

TEST(Config, UnknownFieldsNamed) {
  EXPECT_EQ(error_of(json{{"schema_version", 1}, {"bogus", 1}}), "unknown field 'bogus'");
  EXPECT_EQ(error_of(json{{"schema_version", 1}, {"model", {{"depth", 3}}}}), "unknown field 'model.depth'");
  EXPECT_EQ(error_of(json{{"schema_version", 1}, {"pruning", {{"betta", 1.0}}}}), "unknown field 'pruning.betta'");
}

TEST(Config, WrongTypesNamed) {
  EXPECT_NE(error_of(json{{"schema_version", 1}, {"seed", -1}}).find("'seed'"), std::string::npos);
  EXPECT_NE(error_of(json{{"schema_version", 1}, {"seed", 1.5}}).find("'seed'"), std::string::npos);
  EXPECT_NE(error_of(json{{"schema_version", 1}, {"curriculum", {{"enabled", 1}}}}).find("curriculum.enabled"),
            std::string::npos);
  EXPECT_NE(error_of(json{{"schema_version", 1}, {"optimizer", {{"kind", "sgd"}}}}).find("optimizer.kind"),
            std::string::npos);
  EXPECT_NE(error_of(json{{"schema_version", 1}, {"model", 3}}).find("model"), std::string::npos);
  EXPECT_NE(error_of(json{{"schema_version", 1}, {"pruning", {{"targets", {"output"}}}}}).find("pruning.targets"),
            std::string::npos);
}

TEST(Config, RangeValidation) {
  EXPECT_NE(error_of(json{{"schema_version", 1}, {"optimizer", {{"momentum", 1.0}}}}).find("optimizer.momentum"),
            std::string::npos);
  EXPECT_NE(error_of(json{{"schema_version", 1}, {"pruning", {{"retention_end", 0.99}}}}).find("retention_end"),
            std::string::npos);
  EXPECT_NE(error_of(json{{"schema_version", 1}, {"surgery", {{"gamma", 0.0}}}}).find("surgery.gamma"),
            std::string::npos);
  EXPECT_NE(error_of(json{{"schema_version", 1}, {"max_iters", 0}}).find("max_iters"), std::string::npos);
  EXPECT_NE(error_of(json{{"schema_version", 1}, {"model", {{"embed_dim", 0}}}}).find("model"), std::string::npos);
}

TEST(Config, LoadConfigErrors) {
  EXPECT_THROW(load_config("/nonexistent/dir/cfg.json"), IoError);
  const auto path = std::filesystem::temp_directory_path() / "muonad_bad_config.json";
  {
    std::ofstream(path) << "{\"schema_version\": 1,";
  }
  try {
    load_config(path.string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("malformed JSON"), std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST(Config, ApplyOverride) {
  json doc{{"schema_version", 1}};
  apply_override(doc, "optimizer.kind", "adamw");
  apply_override(doc, "seed", 7);
  EXPECT_EQ(doc["optimizer"]["kind"], "adamw");
  const ExperimentConfig cfg = config_from_json(doc);
  EXPECT_EQ(cfg.optimizer.kind, OptimizerKind::AdamW);
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_THROW(apply_override(doc, "seed.x", 1), Error);
  EXPECT_THROW(apply_override(doc, "a..b", 1), Error);
}

TEST(Config, ExpandBenchCartesian) {
  const json doc = {{"base", {{"schema_version", 1}, {"label", "b"}, {"max_iters", 5}}},
                    {"matrix", {{"optimizer.kind", {"muon", "adamw"}}, {"pruning.channels", {true, false}},
                                {"seed", {1, 2, 3}}}}};
  const auto cfgs = expand_bench(doc);
  ASSERT_EQ(cfgs.size(), 12u);
  // nlohmann orders object keys alphabetically: optimizer.kind, pruning.channels, seed.
  EXPECT_EQ(cfgs[0].label, "b/optimizer.kind=muon/pruning.channels=true/seed=1");
  EXPECT_EQ(cfgs[1].seed, 2u);
  EXPECT_EQ(cfgs[3].pruning.channels, false);
  EXPECT_EQ(cfgs[6].optimizer.kind, OptimizerKind::AdamW);
  for (const auto& c : cfgs) EXPECT_EQ(c.max_iters, 5u);
}

TEST(Config, ExpandBenchRunsAndErrors) {
  const json runs = {{"runs", {{{"schema_version", 1}, {"label", "x"}}, {{"schema_version", 1}, {"label", "y"}}}}};
  const auto cfgs = expand_bench(runs);
  ASSERT_EQ(cfgs.size(), 2u);
  EXPECT_EQ(cfgs[1].label, "y");
  EXPECT_EQ(expand_bench(json{{"base", {{"schema_version", 1}}}}).size(), 1u);
  EXPECT_THROW(expand_bench(json{{"runs", json::array()}}), Error);
  EXPECT_THROW(expand_bench(json{{"base", {{"schema_version", 1}}}, {"matrix", {{"seed", json::array()}}}}), Error);
  EXPECT_THROW(expand_bench(json{{"base", {{"schema_version", 1}}}, {"extra", 1}}), Error);
  EXPECT_THROW(expand_bench(json{{"base", {{"schema_version", 1}}}, {"matrix", {{"bogus", {1}}}}}), Error);
}
