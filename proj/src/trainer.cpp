#include "muonad/trainer.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "muonad/error.hpp"
#include "muonad/metrics.hpp"
#include "muonad/muon.hpp"
#include "muonad/precision.hpp"
#include "muonad/pruning.hpp"
#include "muonad/rng.hpp"
#include "muonad/surgery.hpp"

namespace muonad {

namespace {

using nlohmann::json;

// Index into a layer's (query, key, value) triple.
constexpr std::array<const char*, 3> kMatrixNames = {"query", "key", "value"};

Tensor& matrix_of(LayerWeights& w, int m) {
  return m == 0 ? w.query : m == 1 ? w.key : w.value;
}

const Tensor& matrix_of(const LayerWeights& w, int m) {
  return m == 0 ? w.query : m == 1 ? w.key : w.value;
}

bool is_target(const PruneTargets& t, int m) {
  return m == 0 ? t.query : m == 1 ? t.key : t.value;
}

// Optimizer state for one tensor, whichever optimizer is configured.
struct Slot {
  MuonState muon;
  AdamWState adam;
};

Slot make_slot(const Tensor& p, const OptimizerConfig& o) {
  Slot s;
  s.muon = MuonState::for_param(p, o.momentum, o.ns_steps);
  s.adam = AdamWState::for_param(p, o.weight_decay);
  s.adam.beta1 = o.beta1;
  s.adam.beta2 = o.beta2;
  s.adam.eps = o.eps;
  return s;
}

struct ChannelState {
  PruneMask mask;
  ImportanceScores importance;
};

double fd_distance(const Tensor& a, const Tensor& b) {
  return frechet_distance(fit_gaussian(a), fit_gaussian(b));
}

json curriculum_json(const CurriculumState& s) {
  json j{{"iteration", s.iteration},
         {"phase", std::string(to_string(s.phase))},
         {"lambda_style", s.lambda_style},
         {"eta_lambda", s.eta_lambda},
         {"lr", s.lr},
         {"freeze_style", s.freeze_style},
         {"balance_gradients", s.balance_gradients}};
  j["last_val_distance"] = s.last_val_distance ? json(*s.last_val_distance) : json(nullptr);
  return j;
}

std::size_t bytes_per_entry(PrecisionMode mode) {
  return mode == PrecisionMode::Mixed ? 2 : 8;
}

}  // namespace

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

TaskSetup make_task(const ExperimentConfig& cfg) {
  cfg.validate();
  ToyModelConfig mc = cfg.model;
  mc.seed = cfg.seed;
  TaskSetup t;
  t.model = ToyModel::init(mc);
  const Shape shape = mc.latent_shape();
  SeededRng style_rng(cfg.seed + 1), content_rng(cfg.seed + 2), init_rng(cfg.seed + 3);
  t.z_style = draw_normal(style_rng, shape);
  t.z_content = t.z_style + cfg.task.content_offset * draw_normal(content_rng, shape);
  t.z_init = t.z_style + cfg.task.init_noise * draw_normal(init_rng, shape);
  t.teacher = forward(t.model, t.z_style);
  t.content_target = forward(t.model, t.z_content).features;
  return t;
}

Tensor render_trace(const ForwardTrace& trace, std::size_t min_side) {
  require(!trace.attn_maps.empty(), "render_trace: empty trace");
  const std::size_t n = trace.attn_maps.front().weights.rows();
  const std::size_t block = std::max<std::size_t>(1, (min_side + n - 1) / n);
  const std::size_t side = n * block;
  Tensor img({side * trace.attn_maps.size(), side});
  for (std::size_t l = 0; l < trace.attn_maps.size(); ++l) {
    const Tensor& a = trace.attn_maps[l].weights;
    for (std::size_t r = 0; r < side; ++r) {
      for (std::size_t c = 0; c < side; ++c) {
        img(l * side + r, c) = a(r / block, c / block);
      }
    }
  }
  return img;
}

RunRecord run_train(const ExperimentConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };

  TaskSetup task = make_task(cfg);
  const std::size_t num_layers = cfg.model.num_layers;
  const bool mixed = cfg.precision == PrecisionMode::Mixed;
  const auto& prune = cfg.pruning;

  ToyModel student = task.model;
  Tensor z = mixed ? quantize(task.z_init, PrecisionTag::HighRange16) : task.z_init;

  Slot z_slot = make_slot(z, cfg.optimizer);
  std::vector<std::array<Slot, 3>> w_slots;
  std::vector<std::array<ChannelState, 3>> channels(num_layers);
  for (std::size_t l = 0; l < num_layers; ++l) {
    std::array<Slot, 3> slots;
    for (int m = 0; m < 3; ++m) {
      const Tensor& w = matrix_of(student.layers[l], m);
      slots[m] = make_slot(w, cfg.optimizer);
      channels[l][m].mask = PruneMask::all_ones(w.size());
      channels[l][m].importance.scores = Tensor::zeros(w.shape());
    }
    w_slots.push_back(std::move(slots));
  }
  PruneMask layer_mask = PruneMask::all_ones(num_layers);

  CurriculumState cs = CurriculumState::initial(cfg.curriculum.total_iters, cfg.curriculum.eta_lambda);
  MemoryLedger ledger;
  const std::size_t entry_bytes = bytes_per_entry(cfg.precision);

  RunRecord rec;
  rec.label = cfg.label;
  auto& summary = rec.summary;

  const auto effective_model = [&] {
    ToyModel eff = student;
    if (!prune.channels) {
      return eff;
    }
    for (std::size_t l = 0; l < num_layers; ++l) {
      for (int m = 0; m < 3; ++m) {
        if (is_target(prune.targets, m)) {
          Tensor& w = matrix_of(eff.layers[l], m);
          w = hadamard(w, channels[l][m].mask.as_tensor(w.shape()));
        }
      }
    }
    return eff;
  };

  const auto density_of = [&](const ToyModel& eff) {
    std::vector<PruneMask> masks;
    std::vector<Tensor> weights;
    for (std::size_t l = 0; l < num_layers; ++l) {
      for (int m = 0; m < 3; ++m) {
        if (is_target(prune.targets, m)) {
          masks.push_back(prune.channels ? channels[l][m].mask : PruneMask::all_ones(eff.layers[l].query.size()));
          weights.push_back(matrix_of(eff.layers[l], m));
        }
      }
    }
    if (masks.empty()) {
      return MemoryEff{1.0, 0.0};
    }
    return memory_eff(masks, weights, entry_bytes, entry_bytes);
  };

  for (std::uint64_t t = 0; t < cfg.max_iters; ++t) {
    // (1) curriculum
    const std::uint64_t sched_t = std::min<std::uint64_t>(t, cfg.curriculum.total_iters);
    const Phase phase = phase_of(static_cast<std::int64_t>(t));
    const double lr = cfg.curriculum.enabled ? cs.lr : lr_schedule(sched_t, cfg.curriculum.total_iters);
    const double lambda_style = cfg.curriculum.enabled ? cs.lambda_style : kLambdaStyleInit;
    const double lambda_content = 1.0 / lambda_style;

    // (2)-(3) forward and split gradients
    const ToyModel eff = effective_model();
    const BackwardResult bs = backward(eff, z, task.teacher, task.content_target, {1.0, 0.0}, &layer_mask);
    const BackwardResult bc = backward(eff, z, task.teacher, task.content_target, {0.0, lambda_content}, &layer_mask);

    LogRow row;
    row.iteration = t;
    row.phase = phase;
    row.distill = bs.losses.distill;
    row.content = bs.losses.content;
    row.total = total_loss(row.distill, row.content, lambda_content);
    row.lambda_style = lambda_style;
    row.lr = lr;
    row.kept_layers = layer_mask.count_kept();
    row.density = density_of(eff).density;

    if (!summary.iterations_to_threshold && row.distill <= cfg.loss_threshold) {
      summary.iterations_to_threshold = t;
    }

    // (4) conflict surgery
    Tensor g_style = bs.grads.latent;
    const Tensor& g_content = bc.grads.latent;
    const bool both_nonzero = l2_norm(g_style) > 0.0 && l2_norm(g_content) > 0.0;
    if (both_nonzero) {
      row.cos_theta = cos_angle(g_style, g_content);
    }
    if (cfg.surgery.conflict_projection && both_nonzero) {
      ProjectionResult pr = project_conflict(g_style, g_content, cfg.surgery.params);
      row.projected = pr.report.projected;
      g_style = std::move(pr.gradient);
    }
    if (cfg.curriculum.enabled && cs.balance_gradients && both_nonzero && l2_norm(g_style) > 0.0) {
      g_style = balance_magnitudes(g_style, g_content, cfg.surgery.params.gamma);
    }
    Tensor g = g_style + g_content;

    // (5) latent orthogonal projection
    if (cfg.surgery.latent_projection && l2_norm(z) > 0.0) {
      g = latent_project(z, g);
    }
    const double gz = l2_norm(g) * l2_norm(z);
    row.latent_alignment = gz > 0.0 ? std::abs(dot(z, g)) / gz : 0.0;
    summary.max_latent_alignment = std::max(summary.max_latent_alignment, row.latent_alignment);

    // (6) optimizer update
    if (l2_norm(g) > 0.0 || cfg.optimizer.kind == OptimizerKind::AdamW) {
      if (cfg.optimizer.kind == OptimizerKind::Muon) {
        MuonResult r = latent_update(z_slot.muon, z, g, lr);
        z = std::move(r.param);
        z_slot.muon = std::move(r.state);
      } else {
        AdamWResult r = adamw_step(z_slot.adam, z, g, lr);
        z = std::move(r.param);
        z_slot.adam = std::move(r.state);
      }
    }
    if (mixed) {
      z = quantize(z, PrecisionTag::HighRange16);
    }

    for (std::size_t l = 0; l < num_layers; ++l) {
      for (int m = 0; m < 3; ++m) {
        const Tensor grad_w = matrix_of(bs.grads.layers[l], m) + matrix_of(bc.grads.layers[l], m);
        const bool masked = prune.channels && is_target(prune.targets, m);
        if (masked) {
          ChannelState& ch = channels[l][m];
          ch.importance = channel_importance(grad_w, matrix_of(student.layers[l], m), ch.importance, prune.params);
        }
        if (!cfg.task.train_weights || !layer_mask.bits[l]) {
          continue;
        }
        Tensor step_grad = masked ? hadamard(grad_w, channels[l][m].mask.as_tensor(grad_w.shape())) : grad_w;
        std::vector<PrecisionTag> tags;
        if (mixed) {
          const Tensor& s = channels[l][m].importance.scores;
          const double smax = *std::max_element(s.data().begin(), s.data().end());
          tags = smax > 0.0 ? assign_precision((1.0 / smax) * s, prune.params.importance_threshold)
                            : std::vector<PrecisionTag>(s.size(), PrecisionTag::HighRange16);
          for (std::size_t i = 0; i < tags.size(); ++i) {
            if (tags[i] == PrecisionTag::HighPrec16) {
              step_grad[i] = 0.0;
            }
          }
        }
        if (l2_norm(step_grad) == 0.0) {
          continue;
        }
        Tensor& w = matrix_of(student.layers[l], m);
        Slot& slot = w_slots[l][m];
        if (cfg.optimizer.kind == OptimizerKind::Muon) {
          MuonResult r = muon_step(slot.muon, w, step_grad, lr);
          w = std::move(r.param);
          slot.muon = std::move(r.state);
        } else {
          AdamWResult r = adamw_step(slot.adam, w, step_grad, lr);
          w = std::move(r.param);
          slot.adam = std::move(r.state);
        }
        if (mixed) {
          w = quantize_tagged(w, tags);
        }
      }
    }

    // (7) re-masking
    if ((t + 1) % prune.remask_every == 0) {
      const ToyModel eff_now = effective_model();
      if (prune.entropy_layers) {
        const ForwardTrace full = forward(eff_now, z);
        std::vector<double> entropies;
        for (const auto& map : full.attn_maps) {
          entropies.push_back(attention_entropy(map.weights));
        }
        layer_mask = keep_layers(entropies, prune.params.beta);
      }
      if (prune.channels) {
        const double k = cfg.curriculum.enabled ? mask_k_for_phase(phase) : prune.params.k;
        const double retention =
            retention_schedule(std::min<std::uint64_t>(t + 1, cfg.curriculum.total_iters),
                               cfg.curriculum.total_iters, prune.retention_start, prune.retention_end);
        for (std::size_t l = 0; l < num_layers; ++l) {
          for (int m = 0; m < 3; ++m) {
            if (!is_target(prune.targets, m)) {
              continue;
            }
            const Tensor& s = channels[l][m].importance.scores;
            const double smax = *std::max_element(s.data().begin(), s.data().end());
            if (smax <= 0.0) {
              continue;
            }
            const PruneMask stat = binarize_mask(s, k);
            const PruneMask top = top_fraction_mask(s, retention);
            PruneMask next = top;
            for (std::size_t i = 0; i < next.size(); ++i) {
              const bool keep = (stat.bits[i] || top.bits[i]) && s[i] / smax >= prune.params.importance_threshold;
              next.bits[i] = keep ? 1 : 0;
            }
            channels[l][m].mask = std::move(next);
          }
        }
      }
    }

    // (8) validation distance, curriculum, memory accounting, logging
    const ToyModel eff_after = effective_model();
    const ForwardTrace after = forward(eff_after, z, &layer_mask);
    const double val = fd_distance(after.features, task.teacher.features);
    rec.val_distances.push_back(val);
    row.val_distance = val;
    if (cfg.curriculum.enabled) {
      cs = step(cs, val);
    }

    std::uint64_t geometry = 0;
    for (std::size_t l = 0; l < num_layers; ++l) {
      for (int m = 0; m < 3; ++m) {
        const Tensor& w = matrix_of(eff_after.layers[l], m);
        for (double v : w.data()) {
          geometry += (v != 0.0 && layer_mask.bits[l]) ? entry_bytes : 0;
        }
      }
    }
    const std::uint64_t texture =
        (z.size() + layer_mask.count_kept() * cfg.model.token_count * cfg.model.token_count) * entry_bytes;
    ledger.record(t, geometry, texture);
    row.peak_memory = peak_memory(ledger);

    const bool last = t + 1 == cfg.max_iters;
    const bool hit_stop = cfg.stop_at_threshold && summary.iterations_to_threshold.has_value();
    if (t % cfg.log_every == 0 || last || hit_stop) {
      row.wall_time = elapsed();
      rec.rows.push_back(row);
      if (cfg.curriculum.enabled) {
        rec.curriculum_snapshots.push_back(curriculum_json(cs));
      }
    }
    summary.iterations_run = t + 1;
    if (hit_stop) {
      break;
    }
  }

  const ToyModel eff = effective_model();
  const ForwardTrace final_trace = forward(eff, z, &layer_mask);
  summary.final_distill = distill_loss(task.teacher, final_trace);
  summary.final_content = content_loss(final_trace.features, task.content_target, eff.content_projection);
  const double final_lambda = cfg.curriculum.enabled ? cs.lambda_style : kLambdaStyleInit;
  summary.final_total = total_loss(summary.final_distill, summary.final_content, 1.0 / final_lambda);
  summary.final_density = density_of(eff).density;
  summary.final_kept_layers = layer_mask.count_kept();
  summary.frechet_distance = fd_distance(final_trace.features, task.teacher.features);
  summary.ssim_vs_teacher_render = ssim(render_trace(task.teacher), render_trace(final_trace));
  summary.peak_memory = peak_memory(ledger);

  rec.masks.push_back(json::parse(mask_to_json("layers", layer_mask)));
  if (prune.channels) {
    for (std::size_t l = 0; l < num_layers; ++l) {
      for (int m = 0; m < 3; ++m) {
        if (is_target(prune.targets, m)) {
          const std::string name = "layer" + std::to_string(l) + "." + kMatrixNames[m];
          rec.masks.push_back(json::parse(mask_to_json(name, channels[l][m].mask)));
        }
      }
    }
  }
  summary.wall_time = elapsed();
  return rec;
}

std::string rows_to_csv(const std::vector<LogRow>& rows) {
  std::ostringstream out;
  out << "# rng " << SeededRng::kAlgorithm << '\n';
  out << "iteration,phase,L_distill,L_content,L_total,lambda_style,lr,kept_layer_count,density,cos_theta,"
         "projected,peak_memory,val_distance,latent_alignment,wall_time\n";
  for (const auto& r : rows) {
    out << r.iteration << ',' << to_string(r.phase) << ',' << format_real(r.distill) << ','
        << format_real(r.content) << ',' << format_real(r.total) << ',' << format_real(r.lambda_style) << ','
        << format_real(r.lr) << ',' << r.kept_layers << ',' << format_real(r.density) << ','
        << format_real(r.cos_theta) << ',' << (r.projected ? 1 : 0) << ',' << r.peak_memory << ','
        << format_real(r.val_distance) << ',' << format_real(r.latent_alignment) << ','
        << format_real(r.wall_time) << '\n';
  }
  return out.str();
}

json record_to_json(const RunRecord& rec, const ExperimentConfig& cfg) {
  json rows = json::array();
  for (const auto& r : rec.rows) {
    rows.push_back({{"iteration", r.iteration},
                    {"phase", std::string(to_string(r.phase))},
                    {"L_distill", r.distill},
                    {"L_content", r.content},
                    {"L_total", r.total},
                    {"lambda_style", r.lambda_style},
                    {"lr", r.lr},
                    {"kept_layer_count", r.kept_layers},
                    {"density", r.density},
                    {"cos_theta", r.cos_theta},
                    {"projected", r.projected},
                    {"peak_memory", r.peak_memory},
                    {"val_distance", r.val_distance},
                    {"latent_alignment", r.latent_alignment},
                    {"wall_time", r.wall_time}});
  }
  const auto& s = rec.summary;
  json summary{{"iterations_run", s.iterations_run},
               {"final_distill", s.final_distill},
               {"final_content", s.final_content},
               {"final_total", s.final_total},
               {"final_density", s.final_density},
               {"final_kept_layers", s.final_kept_layers},
               {"frechet_distance", s.frechet_distance},
               {"ssim_vs_teacher_render", s.ssim_vs_teacher_render},
               {"max_latent_alignment", s.max_latent_alignment},
               {"peak_memory", s.peak_memory},
               {"wall_time", s.wall_time}};
  summary["iterations_to_threshold"] =
      s.iterations_to_threshold ? json(*s.iterations_to_threshold) : json(nullptr);
  return json{{"label", rec.label},
              {"rng", std::string(SeededRng::kAlgorithm)},
              {"config", config_to_json(cfg)},
              {"summary", summary},
              {"rows", rows},
              {"curriculum", rec.curriculum_snapshots},
              {"masks", rec.masks}};
}

}  // namespace muonad
