#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ddpb/bounds.hpp"
#include "ddpb/cli.hpp"
#include "ddpb/config.hpp"
#include "ddpb/error.hpp"
#include "ddpb/gaussian.hpp"
#include "ddpb/pipeline.hpp"
#include "ddpb/toy_model.hpp"

namespace py = pybind11;
using namespace ddpb;

namespace {

py::dict report_dict(const BoundReport& r) {
  py::dict d;
  d["emp_risk"] = r.inputs.emp_risk;
  d["kl"] = r.inputs.kl;
  d["n_eval"] = r.inputs.n_eval;
  d["delta"] = r.inputs.delta;
  d["beta"] = r.beta ? py::object(py::float_(*r.beta)) : py::object(py::none());
  d["b_term"] = r.b_term;
  d["moment_value"] = r.moment_value;
  d["pinsker_value"] = r.pinsker_value;
  d["raw_bound"] = r.raw_bound;
  d["final_bound"] = r.final_bound;
  return d;
}

ExperimentConfig parse_config(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text.empty() ? "{}" : json_text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config is not valid JSON");
  return config_from_json(j);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Data-dependent PAC-Bayes bounds";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_IOError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def("binary_kl", &binary_kl, py::arg("q"), py::arg("p"));
  m.def("kl_inverse", &kl_inverse, py::arg("q"), py::arg("bound"));
  m.def("linear_bound", &linear_bound, py::arg("emp_risk"), py::arg("kl"),
        py::arg("n_eval"), py::arg("beta"), py::arg("delta"));
  m.def("optimal_beta_bound", &optimal_beta_bound, py::arg("r"), py::arg("c"));
  m.def("maurer_b_term", &maurer_b_term, py::arg("kl"), py::arg("n_eval"),
        py::arg("delta"));
  m.def("union_adjusted_delta", &union_adjusted_delta, py::arg("delta"),
        py::arg("grid_size"));
  m.def(
      "variational_kl_bound",
      [](double emp_risk, double b_term) {
        return report_dict(variational_kl_bound(emp_risk, b_term));
      },
      py::arg("emp_risk"), py::arg("b_term"));
  m.def(
      "evaluate_bound",
      [](double emp_risk, double kl, std::size_t n_eval, double delta) {
        return report_dict(evaluate_bound({emp_risk, kl, n_eval, delta}));
      },
      py::arg("emp_risk"), py::arg("kl"), py::arg("n_eval"), py::arg("delta"));
  m.def(
      "kl_diag",
      [](std::vector<double> mq, std::vector<double> vq, std::vector<double> mp,
         std::vector<double> vp) {
        return kl_diag(GaussianSpec(std::move(mq), std::move(vq)),
                       GaussianSpec(std::move(mp), std::move(vp)));
      },
      py::arg("mean_q"), py::arg("var_q"), py::arg("mean_p"), py::arg("var_p"));
  m.def("kl_isotropic", &kl_isotropic, py::arg("sq_distance"), py::arg("dim"),
        py::arg("var_q"), py::arg("var_p"));

  m.def(
      "toy_sweep",
      [](const std::string& preset, double alpha_step) {
        const auto cfg = toy::ToyConfig::preset(preset);
        if (!cfg) throw ConfigError("unknown preset " + preset);
        const toy::Sweep sweep = toy::sweep_alpha(*cfg, toy::alpha_grid(alpha_step));
        py::list rows;
        for (const auto& r : sweep.rows) {
          py::dict d;
          d["alpha"] = r.alpha;
          d["m"] = r.m;
          d["c_of_j"] = r.bounds.c_of_j;
          d["r_bar"] = r.bounds.r_bar;
          d["lower"] = r.bounds.lower;
          d["upper"] = r.bounds.upper;
          rows.append(d);
        }
        return py::make_tuple(rows, sweep.argmin_upper);
      },
      py::arg("preset") = "calibrated", py::arg("alpha_step") = 0.01);

  m.def(
      "get_bound",
      [](const std::string& config_json, double alpha, double epsilon,
         std::uint64_t seed, bool ghost) {
        const ExperimentConfig cfg = parse_config(config_json);
        BoundExperimentResult r;
        {
          py::gil_scoped_release release;
          const DataBundle data = load_data(cfg.dataset, cfg.batch);
          r = get_bound(data.train, ghost ? &*data.ghost : nullptr, data.test, cfg,
                        {alpha, epsilon, seed});
        }
        py::dict d = report_dict(r.bound_report);
        d["prior_source"] = r.prior_source;
        d["m"] = r.m;
        d["sigma_p"] = r.sigma_p_selected;
        d["t"] = r.t_selected;
        d["gibbs_risk_mean"] = r.gibbs_risk.mean;
        d["gibbs_risk_upper"] = r.gibbs_risk.upper;
        d["test_error"] = r.test_error;
        d["train_error"] = r.train_error;
        d["d_alpha"] = r.d_alpha;
        return d;
      },
      py::arg("config_json") = "", py::arg("alpha") = 0.0, py::arg("epsilon") = 0.05,
      py::arg("seed") = 0, py::arg("ghost") = false);

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "ddpb");
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        py::gil_scoped_release release;
        return run_cli(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"));
}
