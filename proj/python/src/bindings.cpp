#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "muonad/config.hpp"
#include "muonad/curriculum.hpp"
#include "muonad/error.hpp"
#include "muonad/harness.hpp"
#include "muonad/metrics.hpp"
#include "muonad/muon.hpp"
#include "muonad/precision.hpp"
#include "muonad/pruning.hpp"
#include "muonad/rng.hpp"
#include "muonad/surgery.hpp"
#include "muonad/trainer.hpp"

namespace py = pybind11;
using namespace muonad;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

ExperimentConfig parse_config(const std::string& text) {
  return config_from_json(nlohmann::json::parse(text));
}

std::string train_json(const std::string& config) {
  const ExperimentConfig cfg = parse_config(config);
  return record_to_json(run_train(cfg), cfg).dump();
}

std::string train_csv(const std::string& config) {
  return rows_to_csv(run_train(parse_config(config)).rows);
}

py::dict gradcheck(const std::string& config) {
  const GradcheckReport rep = run_gradcheck(parse_config(config));
  py::dict d;
  d["max_rel_error"] = rep.max_rel_error;
  d["tolerance"] = rep.tolerance;
  d["passed"] = rep.passed();
  d["cases"] = rep.cases.size();
  return d;
}

std::string metrics_json(const std::string& gen, const std::string& gt, double tau) {
  MetricsOptions opts;
  opts.tau = tau;
  return run_metrics(gen, gt, opts).dump();
}

std::vector<int> mask_bits(const PruneMask& m) {
  return {m.bits.begin(), m.bits.end()};
}

}  // namespace

PYBIND11_MODULE(_muonad, m) {
  py::register_exception<Error>(m, "MuonadError", PyExc_ValueError);
  py::register_exception<IoError>(m, "MuonadIoError", PyExc_OSError);

  m.attr("RNG_ALGORITHM") = std::string(SeededRng::kAlgorithm);

  m.def("newton_schulz", [](const Array& g, int steps) { return to_array(newton_schulz_orthogonalize(to_tensor(g), steps)); },
        py::arg("g"), py::arg("steps") = 5);
  m.def("project_conflict", [](const Array& gs, const Array& gc, double threshold) {
    SurgeryConfig cfg;
    cfg.conflict_threshold = threshold;
    const ProjectionResult r = project_conflict(to_tensor(gs), to_tensor(gc), cfg);
    return py::make_tuple(to_array(r.gradient), r.report.cos_theta, r.report.projected);
  }, py::arg("g_style"), py::arg("g_content"), py::arg("threshold") = -0.5);
  m.def("latent_project", [](const Array& z, const Array& g) { return to_array(latent_project(to_tensor(z), to_tensor(g))); });

  m.def("keep_layers", [](const std::vector<double>& h, double beta) { return mask_bits(keep_layers(h, beta)); },
        py::arg("entropies"), py::arg("beta") = 0.7);
  m.def("binarize_mask", [](const Array& s, double k) { return mask_bits(binarize_mask(to_tensor(s), k)); });
  m.def("retention_schedule", py::overload_cast<std::uint64_t, std::uint64_t>(&retention_schedule));

  m.def("quantize_hr16", py::vectorize(&quantize_hr16));
  m.def("quantize_hp16", py::vectorize(&quantize_hp16));

  m.def("phase_of", [](std::int64_t t) { return static_cast<int>(phase_of(t)); });
  m.def("lr_schedule", &lr_schedule);
  m.def("update_lambda_style", &update_lambda_style);

  m.def("kl_divergence", [](const std::vector<double>& p, const std::vector<double>& q) { return kl_divergence(p, q); });
  m.def("ssim", [](const Array& a, const Array& b, int window) { return ssim(to_tensor(a), to_tensor(b), window); },
        py::arg("a"), py::arg("b"), py::arg("window") = kSsimWindow);
  m.def("frechet_distance", [](const Array& a, const Array& b) {
    return frechet_distance(fit_gaussian(to_tensor(a)), fit_gaussian(to_tensor(b)));
  });
  m.def("mipmap_downsample", [](const Array& t, int level) { return to_array(mipmap_downsample(to_tensor(t), level)); });

  m.def("train_json", &train_json, py::arg("config"), py::call_guard<py::gil_scoped_release>());
  m.def("train_csv", &train_csv, py::arg("config"), py::call_guard<py::gil_scoped_release>());
  m.def("gradcheck", &gradcheck, py::arg("config"));
  m.def("metrics_json", &metrics_json, py::arg("gen"), py::arg("gt"), py::arg("tau") = 0.05);
}
