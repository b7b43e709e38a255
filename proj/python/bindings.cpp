#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "xmd/config.hpp"
#include "xmd/data.hpp"
#include "xmd/error.hpp"
#include "xmd/eval.hpp"
#include "xmd/experiment.hpp"
#include "xmd/losses.hpp"
#include "xmd/quality.hpp"
#include "xmd/selfcheck.hpp"

namespace py = pybind11;
using namespace xmd;

namespace {

py::array_t<double> to_numpy(const Tensor& t) {
  py::array_t<double> out({t.rows(), t.cols()});
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

// JSON crosses the boundary as text; the Python side wraps it in json.loads.
std::string resolve(const std::string& config_json, const std::vector<std::string>& overrides) {
  json doc = preset_json("verification");
  if (!config_json.empty()) {
    const json overlay = json::parse(config_json, nullptr, false);
    if (overlay.is_discarded()) throw ConfigError("config is not valid JSON");
    if (overlay.contains("preset")) doc = preset_json(overlay.at("preset").get<std::string>());
    merge_json(doc, overlay);
  }
  for (const auto& s : overrides) apply_override(doc, s);
  return to_json(experiment_config_from_json(doc)).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Cross-modal knowledge distillation lab (C++ core)";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def("compute_eer", [](std::vector<double> target, std::vector<double> nontarget) {
    return compute_eer({std::move(target), std::move(nontarget)});
  });
  m.def(
      "compute_min_dcf",
      [](std::vector<double> target, std::vector<double> nontarget, double p_tar) {
        return compute_min_dcf({std::move(target), std::move(nontarget)}, p_tar);
      },
      py::arg("target"), py::arg("nontarget"), py::arg("p_target") = 0.01);
  m.def("cosine_margin_from_degrees", &cosine_margin_from_degrees);
  m.def(
      "adaptive_weights",
      [](const std::vector<double>& q, double mu, double sigma, double w_base, double h) {
        QualityConfig cfg;
        cfg.enabled = true;
        cfg.w_base = w_base;
        cfg.h = h;
        return adaptive_weights(q, RunningStats::from_values(mu, sigma), cfg);
      },
      py::arg("quality"), py::arg("mu"), py::arg("sigma"), py::arg("w_base") = 1.0, py::arg("h") = 1.0 / 3.0);
  m.def(
      "generate",
      [](const std::string& spec_json) {
        const json j = spec_json.empty() ? json::object() : json::parse(spec_json);
        const PairedDataset ds = generate(synthetic_spec_from_json(j));
        const BatchData all = gather_all(ds);
        py::dict out;
        out["x_teacher"] = to_numpy(all.x_teacher);
        out["x_student"] = to_numpy(all.x_student);
        out["labels"] = all.labels;
        out["noise_sigma"] = all.noise_sigma;
        return out;
      },
      py::arg("spec_json") = "");
  m.def("resolve_config", &resolve, py::arg("config_json") = "", py::arg("overrides") = std::vector<std::string>{});
  m.def(
      "run_distill",
      [](const std::string& config_json) {
        const ExperimentConfig cfg = experiment_config_from_json(json::parse(config_json));
        py::gil_scoped_release release;
        return to_json(run_distill(cfg)).dump();
      },
      py::arg("config_json"));
  m.def("gradcheck_suite", [](std::size_t seeds) {
    std::vector<py::dict> out;
    for (const auto& c : gradcheck_suite(seeds)) {
      py::dict d;
      d["loss"] = c.loss;
      d["worst_relative_error"] = c.worst_relative_error;
      d["checked"] = c.checked;
      d["skipped"] = c.skipped;
      out.push_back(d);
    }
    return out;
  });
}
