#include "muonad/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "muonad/error.hpp"
#include "muonad/metrics.hpp"
#include "muonad/rng.hpp"
#include "muonad/texture_io.hpp"

namespace muonad {

namespace fs = std::filesystem;
using nlohmann::json;

OutputFormat parse_format(const std::string& s) {
  if (s == "json") return OutputFormat::Json;
  if (s == "csv") return OutputFormat::Csv;
  if (s == "both") return OutputFormat::Both;
  throw Error("invalid --format '" + s + "' (expected json, csv or both)");
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  out << content;
  out.close();
  if (!out) {
    throw IoError("failed writing '" + path.string() + "'");
  }
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir + "'");
  }
}

}  // namespace

void write_run(const RunRecord& rec, const ExperimentConfig& cfg, const std::string& dir, OutputFormat fmt) {
  ensure_dir(dir);
  if (fmt != OutputFormat::Json) {
    write_file(fs::path(dir) / "run.csv", rows_to_csv(rec.rows));
  }
  if (fmt != OutputFormat::Csv) {
    write_file(fs::path(dir) / "run.json", record_to_json(rec, cfg).dump(2) + "\n");
  }
}

std::string strip_wall_time(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    const auto comma = line.rfind(',');
    out << (comma == std::string::npos ? line : line.substr(0, comma)) << '\n';
  }
  return out.str();
}

double gradcheck_rel_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

GradcheckReport run_gradcheck(const ExperimentConfig& cfg) {
  const auto& gc = cfg.gradcheck;
  require(gc.max_tokens <= 8 && gc.max_dim <= 8, "gradcheck runs on toy sizes only (n, d <= 8)");
  SeededRng rng(cfg.seed);
  const auto pick = [&](std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.uniform() * static_cast<double>(hi - lo + 1));
  };

  GradcheckReport report;
  report.tolerance = gc.tolerance;
  for (std::size_t c = 0; c < gc.configs; ++c) {
    ToyModelConfig mc;
    mc.num_layers = pick(1, 3);
    mc.token_count = pick(2, gc.max_tokens);
    mc.embed_dim = pick(2, gc.max_dim);
    mc.seed = rng.next_u64();
    mc.qk_gain = rng.uniform(0.5, 2.0);
    mc.value_gain = rng.uniform(0.2, 1.0);
    const ToyModel model = ToyModel::init(mc);
    const Tensor z = draw_normal(rng, mc.latent_shape());
    const ForwardTrace teacher = forward(model, draw_normal(rng, mc.latent_shape()));
    const Tensor content = draw_normal(rng, mc.latent_shape());
    const double lambda = rng.uniform(0.1, 2.0);
    PruneMask mask = PruneMask::all_ones(mc.num_layers);
    if (mc.num_layers > 1 && rng.uniform() < 0.3) {
      mask.bits[pick(0, mc.num_layers - 1)] = 0;
    }

    BackwardResult an = backward(model, z, teacher, content, {1.0, lambda}, &mask);
    an.grads.latent[0] += gc.corrupt;

    GradcheckCase gcase{mc.num_layers, mc.token_count, mc.embed_dim, lambda, 0.0};
    const double h = gc.step;
    Tensor zp = z;
    for (std::size_t i = 0; i < z.size(); ++i) {
      zp[i] = z[i] + h;
      const double up = evaluate_total_loss(model, zp, teacher, content, lambda, &mask);
      zp[i] = z[i] - h;
      const double dn = evaluate_total_loss(model, zp, teacher, content, lambda, &mask);
      zp[i] = z[i];
      gcase.max_rel_error =
          std::max(gcase.max_rel_error, gradcheck_rel_error(an.grads.latent[i], (up - dn) / (2.0 * h)));
    }
    ToyModel mp = model;
    for (std::size_t l = 0; l < mc.num_layers; ++l) {
      for (int m = 0; m < 3; ++m) {
        auto member = m == 0 ? &LayerWeights::query : m == 1 ? &LayerWeights::key : &LayerWeights::value;
        Tensor& w = mp.layers[l].*member;
        const Tensor& g = an.grads.layers[l].*member;
        for (std::size_t i = 0; i < w.size(); ++i) {
          const double orig = w[i];
          w[i] = orig + h;
          const double up = evaluate_total_loss(mp, z, teacher, content, lambda, &mask);
          w[i] = orig - h;
          const double dn = evaluate_total_loss(mp, z, teacher, content, lambda, &mask);
          w[i] = orig;
          gcase.max_rel_error = std::max(gcase.max_rel_error, gradcheck_rel_error(g[i], (up - dn) / (2.0 * h)));
        }
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, gcase.max_rel_error);
    report.cases.push_back(gcase);
  }
  return report;
}

std::size_t bench_threads(std::size_t jobs) {
  std::size_t n = std::max<unsigned>(1, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MUONAD_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap > 0) {
      n = std::min(n, static_cast<std::size_t>(cap));
    }
  }
  return std::max<std::size_t>(1, std::min(n, jobs));
}

std::vector<BenchRow> run_bench(const std::vector<ExperimentConfig>& configs, std::size_t threads) {
  require(!configs.empty(), "bench needs at least one config");
  std::vector<BenchRow> rows(configs.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      BenchRow& row = rows[i];
      row.label = configs[i].label;
      try {
        const RunRecord rec = run_train(configs[i]);
        row.iterations_to_threshold = rec.summary.iterations_to_threshold;
        row.final_distill = rec.summary.final_distill;
        row.final_content = rec.summary.final_content;
        row.final_total = rec.summary.final_total;
        row.density = rec.summary.final_density;
        row.wall_time = rec.summary.wall_time;
      } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::max<std::size_t>(1, threads); ++t) {
    pool.emplace_back(worker);
  }
  worker();
  for (auto& th : pool) {
    th.join();
  }
  return rows;
}

std::string bench_to_csv(const std::vector<BenchRow>& rows) {
  const auto quote = [](const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      out += c == '"' ? std::string("\"\"") : std::string(1, c);
    }
    return out + "\"";
  };
  std::ostringstream out;
  out << "# rng " << SeededRng::kAlgorithm << '\n';
  out << "label,status,iterations_to_threshold,final_distill,final_content,final_total,density,wall_time\n";
  for (const auto& r : rows) {
    out << quote(r.label) << ',' << (r.ok ? "ok" : "failed") << ','
        << (r.iterations_to_threshold ? std::to_string(*r.iterations_to_threshold) : std::string()) << ','
        << format_real(r.final_distill) << ',' << format_real(r.final_content) << ','
        << format_real(r.final_total) << ',' << format_real(r.density) << ',' << format_real(r.wall_time) << '\n';
  }
  return out.str();
}

json run_metrics(const std::string& gen_path, const std::string& gt_path, const MetricsOptions& opts) {
  require(!opts.levels.empty() && !opts.angles.empty(), "metrics need at least one level and one angle");
  const AssetFile gen = load_asset_file(gen_path);
  const AssetFile gt = load_asset_file(gt_path);
  require(gen.textures.size() == gt.textures.size(),
          [&] { return "texture count differs: " + gen_path + " has " + std::to_string(gen.textures.size()) + ", " + gt_path +
              " has " + std::to_string(gt.textures.size()); });

  const int max_level = *std::max_element(opts.levels.begin(), opts.levels.end());
  std::vector<TextureAsset> ga, ta;
  for (std::size_t i = 0; i < gen.textures.size(); ++i) {
    require(gen.textures[i].shape() == gt.textures[i].shape(),
            [&] { return "texture " + std::to_string(i) + " shape differs: " + shape_str(gen.textures[i].shape()) + " vs " +
                shape_str(gt.textures[i].shape()); });
    ga.push_back(TextureAsset::from_base(gen.textures[i], max_level));
    ta.push_back(TextureAsset::from_base(gt.textures[i], max_level));
  }

  json report{{"gen", gen_path},
              {"gt", gt_path},
              {"config", {{"tau", opts.tau}, {"levels", opts.levels}, {"angles", opts.angles}, {"window", opts.window}}},
              {"texture_count", ga.size()}};
  if (!ga.empty()) {
    json ssim_each = json::array(), adf_each = json::array();
    double ssim_sum = 0.0, adf_sum = 0.0;
    for (std::size_t i = 0; i < ga.size(); ++i) {
      const double s = ssim(ga[i].base, ta[i].base, opts.window);
      const double a = adf(ga[i], ta[i], opts.angles, opts.window);
      ssim_each.push_back(s);
      adf_each.push_back(a);
      ssim_sum += s;
      adf_sum += a;
    }
    const double count = static_cast<double>(ga.size());
    report["ssim"] = ssim_sum / count;
    report["ssim_per_texture"] = ssim_each;
    report["adf"] = adf_sum / count;
    report["adf_per_texture"] = adf_each;
    json levels = json::object();
    double mcr_sum = 0.0;
    for (int s : opts.levels) {
      const double v = mcr(ga, ta, s, opts.tau);
      levels[std::to_string(s)] = v;
      mcr_sum += v;
    }
    report["mcr"] = {{"levels", levels}, {"mean", mcr_sum / static_cast<double>(opts.levels.size())}};
  }
  if (gen.features && gt.features) {
    require(gen.features->cols() == gt.features->cols(), [&] { return "feature dimension differs between " + gen_path + " and " +
                                                             gt_path; });
    report["frechet_distance"] = frechet_distance(fit_gaussian(*gen.features), fit_gaussian(*gt.features));
  }
  return report;
}

}  // namespace muonad
