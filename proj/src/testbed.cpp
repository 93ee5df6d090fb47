#include "muonad/testbed.hpp"

#include <cmath>

#include <json.hpp>

#include "muonad/error.hpp"
#include "muonad/metrics.hpp"
#include "muonad/rng.hpp"

namespace muonad {

void ToyModelConfig::validate() const {
  require(num_layers >= 1, "model.num_layers must be at least 1");
  require(token_count >= 2, "model.token_count must be at least 2");
  require(embed_dim >= 2, "model.embed_dim must be at least 2");
  require(qk_gain >= 0.0 && value_gain >= 0.0, "model gains must be non-negative");
}

ToyModel ToyModel::init(const ToyModelConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.embed_dim;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  SeededRng rng(cfg.seed);
  ToyModel model;
  model.config = cfg;
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    LayerWeights w;
    w.query = (cfg.qk_gain * inv_sqrt_d) * draw_normal(rng, {d, d});
    w.key = (cfg.qk_gain * inv_sqrt_d) * draw_normal(rng, {d, d});
    w.value = (cfg.value_gain * inv_sqrt_d) * draw_normal(rng, {d, d});
    model.layers.push_back(std::move(w));
  }
  model.content_projection = inv_sqrt_d * draw_normal(rng, {d, d});
  return model;
}

ToyModel ToyModel::zeros(const ToyModelConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.embed_dim;
  ToyModel model;
  model.config = cfg;
  model.layers.assign(cfg.num_layers, LayerWeights{Tensor({d, d}), Tensor({d, d}), Tensor({d, d})});
  model.content_projection = Tensor::identity(d);
  return model;
}

std::size_t ToyModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) {
    n += l.query.size() + l.key.size() + l.value.size();
  }
  return n;
}

std::size_t ForwardTrace::active_layers() const {
  std::size_t n = 0;
  for (const auto& m : attn_maps) {
    n += m.active ? 1 : 0;
  }
  return n;
}

ForwardResult forward_with_cache(const ToyModel& model, const Tensor& z, const PruneMask* layer_mask) {
  const auto& cfg = model.config;
  require(z.shape() == cfg.latent_shape(),
          [&] { return "latent shape " + shape_str(z.shape()) + " does not match model " + shape_str(cfg.latent_shape()); });
  require(model.layers.size() == cfg.num_layers, [&] { return "model has " + std::to_string(model.layers.size()) +
                                                     " layers, config says " + std::to_string(cfg.num_layers); });
  if (layer_mask != nullptr) {
    require(layer_mask->size() == cfg.num_layers, [&] { return "layer mask length " + std::to_string(layer_mask->size()) +
                                                      " does not match layer count " +
                                                      std::to_string(cfg.num_layers); });
  }
  const std::size_t n = cfg.token_count;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim));

  ForwardResult out;
  out.cache.resize(cfg.num_layers);
  Tensor h = z;
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    if (layer_mask != nullptr && layer_mask->bits[l] == 0) {
      out.trace.attn_maps.push_back({Tensor({n, n}, 1.0 / static_cast<double>(n)), false});
      continue;
    }
    const auto& w = model.layers[l];
    LayerCache c{h, matmul(h, w.query), matmul(h, w.key), matmul(h, w.value)};
    Tensor attn = softmax_rows(inv_sqrt_d * matmul_nt(c.query, c.key));
    axpy(1.0, matmul(attn, c.value), h);
    out.trace.attn_maps.push_back({std::move(attn), true});
    out.cache[l] = std::move(c);
  }
  out.trace.features = std::move(h);
  return out;
}

ForwardTrace forward(const ToyModel& model, const Tensor& z, const PruneMask* layer_mask) {
  return forward_with_cache(model, z, layer_mask).trace;
}

namespace {

void check_trace_pair(const ForwardTrace& teacher, const ForwardTrace& student) {
  require(teacher.attn_maps.size() == student.attn_maps.size(),
          [&] { return "trace layer count mismatch: " + std::to_string(teacher.attn_maps.size()) + " vs " +
              std::to_string(student.attn_maps.size()); });
  for (std::size_t l = 0; l < teacher.attn_maps.size(); ++l) {
    require(teacher.attn_maps[l].weights.shape() == student.attn_maps[l].weights.shape(),
            [&] { return "attention map shape mismatch at layer " + std::to_string(l); });
  }
}

}  // namespace

double distill_loss(const ForwardTrace& teacher, const ForwardTrace& student) {
  check_trace_pair(teacher, student);
  double total = 0.0;
  std::size_t rows = 0;
  for (std::size_t l = 0; l < student.attn_maps.size(); ++l) {
    if (!student.attn_maps[l].active) {
      continue;
    }
    const Tensor& p = teacher.attn_maps[l].weights;
    const Tensor& q = student.attn_maps[l].weights;
    const std::size_t n = p.cols();
    for (std::size_t i = 0; i < p.rows(); ++i) {
      total += kl_divergence(std::span(p.data()).subspan(i * n, n), std::span(q.data()).subspan(i * n, n));
    }
    rows += p.rows();
  }
  require(rows > 0, "distill_loss: student trace has no active layers");
  return total / static_cast<double>(rows);
}

double content_loss(const Tensor& gen_features, const Tensor& content_features, const Tensor& projection) {
  require(gen_features.shape() == content_features.shape(),
          [&] { return "content_loss: shape mismatch " + shape_str(gen_features.shape()) + " vs " +
              shape_str(content_features.shape()); });
  const Tensor diff = matmul(gen_features - content_features, projection);
  return dot(diff, diff) / static_cast<double>(diff.size());
}

double total_loss(double distill, double content, double lambda_content) {
  require(distill >= 0.0 && content >= 0.0 && lambda_content >= 0.0, "total_loss: inputs must be non-negative");
  return distill + lambda_content * content;
}

BackwardResult backward(const ToyModel& model, const Tensor& z, const ForwardTrace& teacher,
                        const Tensor& content_target, LossWeights weights, const PruneMask* layer_mask) {
  ForwardResult fwd = forward_with_cache(model, z, layer_mask);
  const auto& cfg = model.config;
  const std::size_t n = cfg.token_count, d = cfg.embed_dim;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  require(content_target.shape() == fwd.trace.features.shape(), "content target shape mismatch");

  BackwardResult out;
  out.losses.distill = distill_loss(teacher, fwd.trace);
  out.losses.content = content_loss(fwd.trace.features, content_target, model.content_projection);

  const Tensor proj_diff = matmul(fwd.trace.features - content_target, model.content_projection);
  Tensor dh = (weights.content * 2.0 / static_cast<double>(proj_diff.size())) *
              matmul_nt(proj_diff, model.content_projection);
  const double distill_scale = weights.distill / static_cast<double>(fwd.trace.active_layers() * n);

  out.grads.layers.assign(cfg.num_layers, LayerWeights{Tensor({d, d}), Tensor({d, d}), Tensor({d, d})});
  for (std::size_t li = cfg.num_layers; li-- > 0;) {
    const auto& map = fwd.trace.attn_maps[li];
    if (!map.active) {
      continue;
    }
    const LayerCache& c = fwd.cache[li];
    const LayerWeights& w = model.layers[li];
    const Tensor& a = map.weights;
    const Tensor& t = teacher.attn_maps[li].weights;

    const Tensor d_attn = matmul_nt(dh, c.value);
    const Tensor d_value = matmul_tn(a, dh);
    Tensor d_logits({n, n});
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        row += d_attn(i, j) * a(i, j);
      }
      for (std::size_t j = 0; j < n; ++j) {
        d_logits(i, j) = (a(i, j) * (d_attn(i, j) - row) + distill_scale * (a(i, j) - t(i, j))) * inv_sqrt_d;
      }
    }
    const Tensor d_query = matmul(d_logits, c.key);
    const Tensor d_key = matmul_tn(d_logits, c.query);

    auto& g = out.grads.layers[li];
    g.query = matmul_tn(c.input, d_query);
    g.key = matmul_tn(c.input, d_key);
    g.value = matmul_tn(c.input, d_value);

    axpy(1.0, matmul_nt(d_query, w.query), dh);
    axpy(1.0, matmul_nt(d_key, w.key), dh);
    axpy(1.0, matmul_nt(d_value, w.value), dh);
  }
  out.grads.latent = std::move(dh);
  out.trace = std::move(fwd.trace);
  return out;
}

Tensor grad_total(const ToyModel& model, const Tensor& z, const ForwardTrace& teacher, const Tensor& content_target,
                  double lambda_content, const PruneMask* layer_mask) {
  require(lambda_content >= 0.0, "grad_total: lambda_content must be non-negative");
  return backward(model, z, teacher, content_target, {1.0, lambda_content}, layer_mask).grads.latent;
}

double evaluate_total_loss(const ToyModel& model, const Tensor& z, const ForwardTrace& teacher,
                           const Tensor& content_target, double lambda_content, const PruneMask* layer_mask) {
  const ForwardTrace tr = forward(model, z, layer_mask);
  return total_loss(distill_loss(teacher, tr), content_loss(tr.features, content_target, model.content_projection),
                    lambda_content);
}

nlohmann::json tensor_to_json(const Tensor& t) {
  return nlohmann::json{{"shape", t.shape()}, {"data", t.data()}};
}

Tensor tensor_from_json(const nlohmann::json& j) {
  require(j.is_object() && j.contains("shape") && j.contains("data"), "tensor JSON needs \"shape\" and \"data\"");
  return Tensor(j.at("shape").get<Shape>(), j.at("data").get<std::vector<double>>());
}

nlohmann::json trace_to_json(const ForwardTrace& trace) {
  nlohmann::json maps = nlohmann::json::array();
  for (const auto& m : trace.attn_maps) {
    auto jm = tensor_to_json(m.weights);
    jm["active"] = m.active;
    maps.push_back(std::move(jm));
  }
  return nlohmann::json{{"attn_maps", std::move(maps)}, {"features", tensor_to_json(trace.features)}};
}

ForwardTrace trace_from_json(const nlohmann::json& j) {
  ForwardTrace trace;
  for (const auto& jm : j.at("attn_maps")) {
    trace.attn_maps.push_back({tensor_from_json(jm), jm.value("active", true)});
  }
  trace.features = tensor_from_json(j.at("features"));
  return trace;
}

}  // namespace muonad
