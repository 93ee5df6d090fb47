#include "muonad/config.hpp"

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>

#include "muonad/error.hpp"

namespace muonad {

namespace {

using nlohmann::json;

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

// Reads fields from one JSON object and remembers which keys were consumed so
// leftovers can be reported as unknown.
class FieldReader {
 public:
  FieldReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    require(obj_.is_object(), [&] { return "field '" + (path_.empty() ? std::string("<root>") : path_) + "' must be an object"; });
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) {
      return;
    }
    try {
      if constexpr (std::is_same_v<T, bool>) {
        require(it->is_boolean(), "");
      } else if constexpr (std::is_unsigned_v<T>) {
        require(it->is_number_unsigned() || (it->is_number_integer() && it->template get<std::int64_t>() >= 0), "");
      } else if constexpr (std::is_integral_v<T>) {
        require(it->is_number_integer(), "");
      } else if constexpr (std::is_floating_point_v<T>) {
        require(it->is_number(), "");
      } else {
        require(it->is_string(), "");
      }
      out = it->get<T>();
    } catch (const std::exception&) {
      throw Error("invalid value for field '" + join(path_, key) + "': " + it->dump());
    }
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string path(const std::string& key) const { return join(path_, key); }

  void finish() const {
    for (const auto& [key, _] : obj_.items()) {
      require(seen_.count(key) > 0, [&] { return "unknown field '" + join(path_, key) + "'"; });
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_model(const json& j, ToyModelConfig& m) {
  FieldReader r(j, "model");
  r.read("num_layers", m.num_layers);
  r.read("token_count", m.token_count);
  r.read("embed_dim", m.embed_dim);
  r.read("qk_gain", m.qk_gain);
  r.read("value_gain", m.value_gain);
  r.finish();
}

void read_task(const json& j, TaskOptions& t) {
  FieldReader r(j, "task");
  r.read("init_noise", t.init_noise);
  r.read("content_offset", t.content_offset);
  r.read("train_weights", t.train_weights);
  r.finish();
}

void read_optimizer(const json& j, OptimizerConfig& o) {
  FieldReader r(j, "optimizer");
  std::string kind = to_string(o.kind);
  r.read("kind", kind);
  if (kind == "muon") {
    o.kind = OptimizerKind::Muon;
  } else if (kind == "adamw") {
    o.kind = OptimizerKind::AdamW;
  } else {
    throw Error("invalid value for field 'optimizer.kind': \"" + kind + "\" (expected muon or adamw)");
  }
  r.read("momentum", o.momentum);
  r.read("ns_steps", o.ns_steps);
  r.read("beta1", o.beta1);
  r.read("beta2", o.beta2);
  r.read("eps", o.eps);
  r.read("weight_decay", o.weight_decay);
  r.finish();
}

void read_surgery(const json& j, SurgeryOptions& s) {
  FieldReader r(j, "surgery");
  r.read("conflict_projection", s.conflict_projection);
  r.read("latent_projection", s.latent_projection);
  r.read("conflict_threshold", s.params.conflict_threshold);
  r.read("gamma", s.params.gamma);
  r.finish();
}

void read_pruning(const json& j, PruningOptions& p) {
  FieldReader r(j, "pruning");
  r.read("entropy_layers", p.entropy_layers);
  r.read("channels", p.channels);
  r.read("beta", p.params.beta);
  r.read("k", p.params.k);
  r.read("lambda_decay", p.params.lambda_decay);
  r.read("epsilon", p.params.epsilon);
  r.read("window", p.params.window);
  r.read("importance_threshold", p.params.importance_threshold);
  r.read("retention_start", p.retention_start);
  r.read("retention_end", p.retention_end);
  r.read("remask_every", p.remask_every);
  if (const json* t = r.child("targets")) {
    require(t->is_array(), "invalid value for field 'pruning.targets': expected an array");
    p.targets = PruneTargets{false, false, false};
    for (const auto& name : *t) {
      const std::string s = name.is_string() ? name.get<std::string>() : name.dump();
      if (s == "query") {
        p.targets.query = true;
      } else if (s == "key") {
        p.targets.key = true;
      } else if (s == "value") {
        p.targets.value = true;
      } else {
        throw Error("invalid value for field 'pruning.targets': " + name.dump());
      }
    }
  }
  r.finish();
}

void read_curriculum(const json& j, CurriculumOptions& c) {
  FieldReader r(j, "curriculum");
  r.read("enabled", c.enabled);
  r.read("total_iters", c.total_iters);
  r.read("eta_lambda", c.eta_lambda);
  r.finish();
}

void read_gradcheck(const json& j, GradcheckOptions& g) {
  FieldReader r(j, "gradcheck");
  r.read("configs", g.configs);
  r.read("step", g.step);
  r.read("tolerance", g.tolerance);
  r.read("max_tokens", g.max_tokens);
  r.read("max_dim", g.max_dim);
  r.read("corrupt", g.corrupt);
  r.finish();
}

}  // namespace

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::Muon ? "muon" : "adamw";
}

std::string to_string(PrecisionMode mode) {
  return mode == PrecisionMode::Full ? "full" : "mixed";
}

void ExperimentConfig::validate() const {
  try {
    model.validate();
  } catch (const Error& e) {
    throw Error(std::string("invalid model section: ") + e.what());
  }
  require(task.init_noise >= 0.0, "invalid value for field 'task.init_noise': must be >= 0");
  require(task.content_offset >= 0.0, "invalid value for field 'task.content_offset': must be >= 0");
  require(optimizer.momentum >= 0.0 && optimizer.momentum < 1.0,
          "invalid value for field 'optimizer.momentum': must lie in [0, 1)");
  require(optimizer.ns_steps >= 1, "invalid value for field 'optimizer.ns_steps': must be >= 1");
  require(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0, "invalid value for field 'optimizer.beta1'");
  require(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0, "invalid value for field 'optimizer.beta2'");
  require(optimizer.eps > 0.0, "invalid value for field 'optimizer.eps': must be > 0");
  require(optimizer.weight_decay >= 0.0, "invalid value for field 'optimizer.weight_decay': must be >= 0");
  require(surgery.params.gamma > 0.0, "invalid value for field 'surgery.gamma': must be > 0");
  require(surgery.params.conflict_threshold >= -1.0 && surgery.params.conflict_threshold <= 1.0,
          "invalid value for field 'surgery.conflict_threshold': must lie in [-1, 1]");
  try {
    pruning.params.validate();
  } catch (const Error& e) {
    throw Error(std::string("invalid pruning section: ") + e.what());
  }
  require(pruning.retention_start > 0.0 && pruning.retention_start <= 1.0,
          "invalid value for field 'pruning.retention_start': must lie in (0, 1]");
  require(pruning.retention_end > 0.0 && pruning.retention_end <= pruning.retention_start,
          "invalid value for field 'pruning.retention_end': must lie in (0, retention_start]");
  require(pruning.remask_every >= 1, "invalid value for field 'pruning.remask_every': must be >= 1");
  require(curriculum.total_iters >= 1, "invalid value for field 'curriculum.total_iters': must be >= 1");
  require(curriculum.eta_lambda > 0.0, "invalid value for field 'curriculum.eta_lambda': must be > 0");
  require(loss_threshold > 0.0, "invalid value for field 'loss_threshold': must be > 0");
  require(max_iters >= 1, "invalid value for field 'max_iters': must be >= 1");
  require(log_every >= 1, "invalid value for field 'log_every': must be >= 1");
  require(gradcheck.configs >= 1, "invalid value for field 'gradcheck.configs': must be >= 1");
  require(gradcheck.step > 0.0, "invalid value for field 'gradcheck.step': must be > 0");
  require(gradcheck.tolerance > 0.0, "invalid value for field 'gradcheck.tolerance': must be > 0");
  require(gradcheck.max_tokens >= 2 && gradcheck.max_dim >= 2,
          "invalid value for field 'gradcheck.max_tokens/max_dim': must be >= 2");
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  FieldReader r(j, "");
  if (const json* v = r.child("schema_version")) {
    require(v->is_number_integer() && v->get<int>() == kSchemaVersion,
            [&] { return "invalid value for field 'schema_version': " + v->dump() + " (supported: " +
                std::to_string(kSchemaVersion) + ")"; });
  } else {
    throw Error("missing field 'schema_version'");
  }
  r.read("label", cfg.label);
  r.read("seed", cfg.seed);
  if (const json* m = r.child("model")) read_model(*m, cfg.model);
  if (const json* t = r.child("task")) read_task(*t, cfg.task);
  if (const json* o = r.child("optimizer")) read_optimizer(*o, cfg.optimizer);
  if (const json* s = r.child("surgery")) read_surgery(*s, cfg.surgery);
  if (const json* p = r.child("pruning")) read_pruning(*p, cfg.pruning);
  if (const json* c = r.child("curriculum")) read_curriculum(*c, cfg.curriculum);
  if (const json* g = r.child("gradcheck")) read_gradcheck(*g, cfg.gradcheck);
  std::string precision = to_string(cfg.precision);
  r.read("precision", precision);
  if (precision == "full") {
    cfg.precision = PrecisionMode::Full;
  } else if (precision == "mixed") {
    cfg.precision = PrecisionMode::Mixed;
  } else {
    throw Error("invalid value for field 'precision': \"" + precision + "\" (expected full or mixed)");
  }
  r.read("loss_threshold", cfg.loss_threshold);
  r.read("max_iters", cfg.max_iters);
  r.read("log_every", cfg.log_every);
  r.read("stop_at_threshold", cfg.stop_at_threshold);
  r.read("output_path", cfg.output_path);
  r.finish();
  cfg.model.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json targets = json::array();
  if (cfg.pruning.targets.query) targets.push_back("query");
  if (cfg.pruning.targets.key) targets.push_back("key");
  if (cfg.pruning.targets.value) targets.push_back("value");
  const auto& p = cfg.pruning.params;
  return json{
      {"schema_version", kSchemaVersion},
      {"label", cfg.label},
      {"seed", cfg.seed},
      {"model",
       {{"num_layers", cfg.model.num_layers},
        {"token_count", cfg.model.token_count},
        {"embed_dim", cfg.model.embed_dim},
        {"qk_gain", cfg.model.qk_gain},
        {"value_gain", cfg.model.value_gain}}},
      {"task",
       {{"init_noise", cfg.task.init_noise},
        {"content_offset", cfg.task.content_offset},
        {"train_weights", cfg.task.train_weights}}},
      {"optimizer",
       {{"kind", to_string(cfg.optimizer.kind)},
        {"momentum", cfg.optimizer.momentum},
        {"ns_steps", cfg.optimizer.ns_steps},
        {"beta1", cfg.optimizer.beta1},
        {"beta2", cfg.optimizer.beta2},
        {"eps", cfg.optimizer.eps},
        {"weight_decay", cfg.optimizer.weight_decay}}},
      {"surgery",
       {{"conflict_projection", cfg.surgery.conflict_projection},
        {"latent_projection", cfg.surgery.latent_projection},
        {"conflict_threshold", cfg.surgery.params.conflict_threshold},
        {"gamma", cfg.surgery.params.gamma}}},
      {"pruning",
       {{"entropy_layers", cfg.pruning.entropy_layers},
        {"channels", cfg.pruning.channels},
        {"beta", p.beta},
        {"k", p.k},
        {"lambda_decay", p.lambda_decay},
        {"epsilon", p.epsilon},
        {"window", p.window},
        {"importance_threshold", p.importance_threshold},
        {"retention_start", cfg.pruning.retention_start},
        {"retention_end", cfg.pruning.retention_end},
        {"remask_every", cfg.pruning.remask_every},
        {"targets", targets}}},
      {"curriculum",
       {{"enabled", cfg.curriculum.enabled},
        {"total_iters", cfg.curriculum.total_iters},
        {"eta_lambda", cfg.curriculum.eta_lambda}}},
      {"gradcheck",
       {{"configs", cfg.gradcheck.configs},
        {"step", cfg.gradcheck.step},
        {"tolerance", cfg.gradcheck.tolerance},
        {"max_tokens", cfg.gradcheck.max_tokens},
        {"max_dim", cfg.gradcheck.max_dim},
        {"corrupt", cfg.gradcheck.corrupt}}},
      {"precision", to_string(cfg.precision)},
      {"loss_threshold", cfg.loss_threshold},
      {"max_iters", cfg.max_iters},
      {"log_every", cfg.log_every},
      {"stop_at_threshold", cfg.stop_at_threshold},
      {"output_path", cfg.output_path}};
}

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path + "'");
  }
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw Error("malformed JSON in '" + path + "' at byte " + std::to_string(e.byte > 0 ? e.byte - 1 : 0) + ": " + e.what());
  }
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  return config_from_json(read_json_file(path));
}

void apply_override(json& doc, const std::string& path, const json& value) {
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    require(!key.empty(), [&] { return "malformed override path '" + path + "'"; });
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    if (!node->contains(key)) {
      (*node)[key] = json::object();
    }
    node = &(*node)[key];
    require(node->is_object(), [&] { return "override path '" + path + "' crosses a non-object field"; });
    start = dot + 1;
  }
}

std::vector<ExperimentConfig> expand_bench(const json& j) {
  require(j.is_object(), "bench document must be an object");
  std::vector<ExperimentConfig> out;
  if (j.contains("runs")) {
    for (const auto& key : j.items()) {
      require(key.key() == "runs" || key.key() == "schema_version", [&] { return "unknown field '" + key.key() + "'"; });
    }
    for (const auto& run : j.at("runs")) {
      out.push_back(config_from_json(run));
    }
    require(!out.empty(), "bench document lists no runs");
    return out;
  }
  for (const auto& key : j.items()) {
    require(key.key() == "base" || key.key() == "matrix" || key.key() == "schema_version",
            [&] { return "unknown field '" + key.key() + "'"; });
  }
  require(j.contains("base"), "bench document needs \"base\" or \"runs\"");
  const json base = j.at("base");
  std::vector<std::pair<std::string, json>> axes;
  if (j.contains("matrix")) {
    for (const auto& [path, values] : j.at("matrix").items()) {
      require(values.is_array() && !values.empty(), [&] { return "matrix axis '" + path + "' must be a non-empty array"; });
      axes.emplace_back(path, values);
    }
  }
  std::vector<std::size_t> idx(axes.size(), 0);
  while (true) {
    json doc = base;
    std::string label = base.value("label", std::string("run"));
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const json& v = axes[a].second[idx[a]];
      apply_override(doc, axes[a].first, v);
      label += "/" + axes[a].first + "=" + (v.is_string() ? v.get<std::string>() : v.dump());
    }
    doc["label"] = label;
    out.push_back(config_from_json(doc));
    std::size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++idx[a] < axes[a].second.size()) {
        break;
      }
      idx[a] = 0;
      if (a == 0) {
        return out;
      }
    }
    if (axes.empty()) {
      return out;
    }
  }
}

}  // namespace muonad
