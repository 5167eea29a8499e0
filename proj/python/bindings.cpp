#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "encinit/experiment.hpp"

namespace py = pybind11;
using namespace encinit;

namespace {

py::dict dataset_dict(const IoDataset& d) {
  py::dict out;
  out["u"] = d.u;
  out["y"] = d.y;
  out["x_true"] = d.x_true;
  out["e_true"] = d.e_true;
  out["ts"] = d.ts;
  return out;
}

py::dict maps_dict(const ReconstructabilityMaps& m) {
  py::dict out;
  out["W_y"] = m.W_y;
  out["W_u"] = m.W_u;
  out["n"] = m.n;
  out["noisy"] = m.noisy;
  out["lag"] = m.lag;
  out["warnings"] = m.warnings;
  return out;
}

LtiSS make_lti(Matrix A, Matrix B, Matrix C, Matrix D, std::optional<Matrix> K) {
  LtiSS ss{std::move(A), std::move(B), std::move(C), std::move(D), std::move(K), std::nullopt};
  ss.validate();
  return ss;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.attr("__version__") = "0.1.0";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<IndexError>(m, "IndexError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  auto numerical = py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
  py::register_exception<UnobservableError>(m, "UnobservableError", numerical.ptr());
  py::register_exception<ConvergenceError>(m, "ConvergenceError", numerical.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", numerical.ptr());

  py::enum_<InitMethod>(m, "InitMethod")
      .value("random", InitMethod::random)
      .value("model_based", InitMethod::model_based)
      .value("data_based_lls", InitMethod::data_based_lls)
      .value("data_based_ann", InitMethod::data_based_ann);
  m.def("parse_init_method", &parse_init_method);

  m.def(
      "noiseless_maps",
      [](Matrix A, Matrix B, Matrix C, Matrix D, Index n, bool shift) {
        const auto ss = make_lti(std::move(A), std::move(B), std::move(C), std::move(D), std::nullopt);
        const auto maps = noiseless_maps(ss, n);
        return maps_dict(shift ? shift_to_past_window(maps, ss) : maps);
      },
      py::arg("A"), py::arg("B"), py::arg("C"), py::arg("D"), py::arg("n"), py::arg("shift") = false);
  m.def(
      "noisy_maps",
      [](Matrix A, Matrix B, Matrix C, Matrix D, Matrix K, Index n, bool shift) {
        const auto ss = make_lti(std::move(A), std::move(B), std::move(C), std::move(D), std::move(K));
        const auto maps = noisy_maps(ss, n);
        return maps_dict(shift ? shift_to_past_window(maps, ss) : maps);
      },
      py::arg("A"), py::arg("B"), py::arg("C"), py::arg("D"), py::arg("K"), py::arg("n"),
      py::arg("shift") = false);
  m.def("observability_rank",
        [](Matrix A, Matrix C, Index n) { return numerical_rank(observability_matrix(A, C, n)); });

  py::class_<ExperimentConfig>(m, "Config")
      .def(py::init<>())
      .def_static("load", &load_config)
      .def("save", [](const ExperimentConfig& c, const std::string& p) { save_config(c, p); })
      .def("to_string",
           [](const ExperimentConfig& c) {
             std::ostringstream os;
             write_config(c, os);
             return os.str();
           })
      .def_property(
          "seed", [](const ExperimentConfig& c) { return c.seed; },
          [](ExperimentConfig& c, std::uint64_t s) {
            c.seed = s;
            c.sync();
          })
      .def("set_sizes",
           [](ExperimentConfig& c, Index n_est, Index n_val, Index n_test) {
             c.data.n_est = n_est;
             c.data.n_val = n_val;
             c.data.n_test = n_test;
           })
      .def("set_training",
           [](ExperimentConfig& c, Index epochs, Index batch_size, Index T) {
             c.train.epochs = epochs;
             c.train.batch_size = batch_size;
             c.train.T = T;
           })
      .def("set_pretraining", [](ExperimentConfig& c, Index epochs) { c.pretrain.epochs = epochs; })
      .def("set_runs", [](ExperimentConfig& c, Index runs) { c.mc_runs = runs; })
      .def_readwrite("n_a", &ExperimentConfig::n_a)
      .def_readwrite("n_b", &ExperimentConfig::n_b)
      .def("validate", &ExperimentConfig::validate);

  m.def("msd_step",
        [](const ExperimentConfig& c, const Eigen::Vector4d& x, double u, bool baseline) {
          const MsdBaseline model(baseline ? c.baseline_params() : c.system, c.data.ts, c.data.substeps());
          return Vector(model.step(x, u));
        },
        py::arg("config"), py::arg("x"), py::arg("u"), py::arg("baseline") = false);

  m.def("generate", [](const ExperimentConfig& c, const std::string& out) {
    const auto s = cmd_generate(c, out);
    py::dict d;
    d["est"] = dataset_dict(s.est);
    d["val"] = dataset_dict(s.val);
    d["test"] = dataset_dict(s.test);
    return d;
  });
  m.def("init", [](const ExperimentConfig& c, InitMethod method, const std::string& data, const std::string& out) {
    const auto r = cmd_init(c, method, data, out);
    py::dict d;
    d["init_ms"] = r.init_ms;
    d["warnings"] = r.warnings;
    d["W_y"] = Matrix(r.encoder.W_y());
    d["W_u"] = Matrix(r.encoder.W_u());
    d["bias"] = r.encoder.bias();
    return d;
  });
  m.def("train", [](const ExperimentConfig& c, const std::string& data, const std::string& enc,
                    const std::string& out) {
    const auto r = cmd_train(c, data, enc, out);
    std::vector<std::vector<double>> val;
    std::vector<double> loss;
    for (const auto& row : r.history) {
      val.push_back(row.val_rmse);
      loss.push_back(row.train_loss);
    }
    py::dict d;
    d["train_loss"] = loss;
    d["val_rmse"] = val;
    return d;
  });
  m.def("evaluate", [](const ExperimentConfig& c, const std::string& data, const std::string& model,
                       const std::string& out) {
    const auto r = cmd_eval(c, data, model, out);
    py::dict d;
    d["test_rmse"] = r.test_rmse;
    d["tstep_rmse"] = r.tstep_rmse;
    return d;
  });
}
