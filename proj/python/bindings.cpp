#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "peerloss/cli.hpp"
#include "peerloss/data.hpp"
#include "peerloss/error.hpp"
#include "peerloss/losses.hpp"
#include "peerloss/model.hpp"
#include "peerloss/noise.hpp"
#include "peerloss/oracle.hpp"

namespace py = pybind11;
using namespace peerloss;

namespace {

std::vector<std::vector<double>> rows_of(std::size_t k, const std::vector<double>& flat) {
  std::vector<std::vector<double>> out(k, std::vector<double>(k));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) out[i][j] = flat[i * k + j];
  }
  return out;
}

SplitTag tag_from(const std::string& s) {
  if (s == "train") return SplitTag::Train;
  if (s == "val") return SplitTag::Val;
  if (s == "test") return SplitTag::Test;
  raise(ErrorCode::InvalidArgument, "split must be train, val or test");
}

}  // namespace

PYBIND11_MODULE(_peerloss, m) {
  m.doc() = "Peer-loss toolkit core";

  // Module-lifetime reference, intentionally never released.
  static PyObject* error_type =
      py::exception<Error>(m, "PeerlossError", PyExc_ValueError).release().ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("code") = to_string(e.code());
      PyErr_SetObject(error_type, exc.ptr());
    }
  });

  py::enum_<BaseLossKind>(m, "BaseLoss")
      .value("zero_one", BaseLossKind::ZeroOne)
      .value("logistic", BaseLossKind::Logistic)
      .value("sigmoid_symmetric", BaseLossKind::SigmoidSymmetric)
      .value("cross_entropy_multiclass", BaseLossKind::CrossEntropyMulticlass);

  py::class_<NoiseModel>(m, "NoiseModel")
      .def_readonly("e_minus", &NoiseModel::e_minus)
      .def_readonly("e_plus", &NoiseModel::e_plus)
      .def("signal", &NoiseModel::signal)
      .def("__eq__", [](const NoiseModel& a, const NoiseModel& b) { return a == b; })
      .def("__repr__", [](const NoiseModel& nm) {
        std::ostringstream s;
        s << "NoiseModel(e_minus=" << nm.e_minus << ", e_plus=" << nm.e_plus << ")";
        return s.str();
      });

  m.def("make_noise_model", &make_noise_model, py::arg("e_minus"), py::arg("e_plus"));
  m.def("uniform_transition",
        [](std::size_t k, double eps) { return rows_of(k, uniform_transition(k, eps).entries()); },
        py::arg("k"), py::arg("epsilon"));
  m.def("noisy_prior", &noisy_prior, py::arg("p"), py::arg("nm"));
  m.def("alpha_star", &alpha_star, py::arg("p"), py::arg("nm"));
  m.def("risk_bound", &risk_bound, py::arg("alpha"), py::arg("nm"), py::arg("n"), py::arg("delta"));
  m.def("calibration_condition_holds", &calibration_condition_holds, py::arg("alpha"), py::arg("p"),
        py::arg("nm"), py::arg("tol") = kCalibrationTolerance);
  m.def("delta_matrix",
        [](double p, const NoiseModel& classifier_rates, const NoiseModel& label_rates) {
          return rows_of(2, delta_matrix(p, classifier_rates, label_rates).entries);
        },
        py::arg("p"), py::arg("classifier_rates"), py::arg("label_rates"));
  m.def("sign_matrix",
        [](const std::vector<std::vector<double>>& d) {
          DeltaMatrix dm{d.size(), {}};
          for (const auto& row : d) dm.entries.insert(dm.entries.end(), row.begin(), row.end());
          const ScoreMatrix s = sign_matrix(dm);
          std::vector<std::vector<int>> out(dm.k, std::vector<int>(dm.k));
          for (std::size_t i = 0; i < dm.k; ++i) {
            for (std::size_t j = 0; j < dm.k; ++j) out[i][j] = s(i, j);
          }
          return out;
        },
        py::arg("delta"));

  m.def("eval_base",
        [](BaseLossKind kind, double score, int label) {
          const LossEval e = eval_base(kind, score, label);
          return py::make_tuple(e.value, e.grad);
        },
        py::arg("kind"), py::arg("score"), py::arg("label"));
  m.def("surrogate_loss",
        [](BaseLossKind kind, double score, int label, const NoiseModel& nm) {
          const LossEval e = surrogate_loss(kind, score, label, nm);
          return py::make_tuple(e.value, e.grad);
        },
        py::arg("kind"), py::arg("score"), py::arg("label"), py::arg("nm"));

  py::class_<PeerPairing>(m, "PeerPairing")
      .def_readonly("n1", &PeerPairing::n1)
      .def_readonly("n2", &PeerPairing::n2)
      .def_readonly("seed", &PeerPairing::seed)
      .def("__len__", &PeerPairing::size);
  m.def("draw_pairing", &draw_pairing, py::arg("n"), py::arg("seed"));
  m.def("peer_loss_batch",
        [](const std::vector<double>& scores, const std::vector<int>& labels,
           const PeerPairing& pairing, double alpha, BaseLossKind base) {
          const BatchLoss b = peer_loss_batch(LossSpec::peer(alpha, base), scores, labels, pairing);
          py::dict out;
          out["per_sample"] = b.per_sample;
          out["mean"] = b.mean;
          out["score_grad"] = b.score_grad;
          return out;
        },
        py::arg("scores"), py::arg("labels"), py::arg("pairing"), py::arg("alpha") = 1.0,
        py::arg("base") = BaseLossKind::Logistic);

  py::class_<LabeledDataset>(m, "Dataset")
      .def_readonly("n", &LabeledDataset::n)
      .def_readonly("d", &LabeledDataset::d)
      .def_readonly("num_classes", &LabeledDataset::num_classes)
      .def_readonly("clean", &LabeledDataset::clean)
      .def_readonly("noisy", &LabeledDataset::noisy)
      .def_property_readonly("features",
                             [](const LabeledDataset& ds) {
                               std::vector<std::vector<double>> rows(ds.n);
                               for (std::size_t i = 0; i < ds.n; ++i) {
                                 const auto r = ds.row(i);
                                 rows[i].assign(r.begin(), r.end());
                               }
                               return rows;
                             })
      .def_property_readonly("split_tags", [](const LabeledDataset& ds) {
        std::optional<std::vector<std::string>> out;
        if (ds.split_tags) {
          out.emplace();
          for (SplitTag t : *ds.split_tags) out->push_back(to_string(t));
        }
        return out;
      });
  m.def("gen_twonorm", &gen_twonorm, py::arg("n_per_class"), py::arg("d"), py::arg("seed"));
  m.def("gen_circles", &gen_circles, py::arg("n"), py::arg("radius_inner"),
        py::arg("radius_outer"), py::arg("jitter"), py::arg("seed"));
  m.def("flip_labels",
        py::overload_cast<const LabeledDataset&, const NoiseModel&, std::uint64_t>(&flip_labels),
        py::arg("ds"), py::arg("nm"), py::arg("seed"));
  m.def("equalize_prior",
        [](const LabeledDataset& ds, const std::string& by, std::uint64_t seed) {
          if (by != "clean" && by != "noisy") raise(ErrorCode::InvalidArgument, "by must be clean or noisy");
          return equalize_prior(ds, by == "clean" ? LabelChannel::Clean : LabelChannel::Noisy, seed);
        },
        py::arg("ds"), py::arg("by"), py::arg("seed"));
  m.def("split",
        [](const LabeledDataset& ds, std::array<double, 3> fractions, std::uint64_t seed) {
          return split(ds, fractions, seed);
        },
        py::arg("ds"), py::arg("fractions"), py::arg("seed"));
  m.def("load_csv",
        [](const std::string& path, const std::string& label_column, const std::string& encoding,
           std::optional<std::string> noisy_column, std::optional<std::string> split_column) {
          CsvOptions o;
          o.label_column = label_column;
          o.noisy_column = std::move(noisy_column);
          o.split_column = std::move(split_column);
          if (encoding != "pm1" && encoding != "zero_based") {
            raise(ErrorCode::InvalidArgument, "encoding must be pm1 or zero_based");
          }
          o.encoding = encoding == "pm1" ? LabelEncoding::Pm1 : LabelEncoding::ZeroBased;
          return load_csv(path, o);
        },
        py::arg("path"), py::arg("label_column") = "label", py::arg("encoding") = "pm1",
        py::arg("noisy_column") = py::none(), py::arg("split_column") = py::none());
  m.def("write_csv", &write_csv, py::arg("path"), py::arg("ds"));

  py::class_<Classifier>(m, "Classifier")
      .def_readwrite("params", &Classifier::params)
      .def_property_readonly("input_dim", [](const Classifier& c) { return c.arch.input_dim; })
      .def("forward", [](const Classifier& c, const std::vector<double>& x) { return forward_scores(c, x); })
      .def("predict", [](const Classifier& c, const std::vector<double>& x) { return predict(c, x); })
      .def("accuracy", [](const Classifier& c, const LabeledDataset& ds, const std::string& split_name) {
        std::size_t hits = 0;
        const std::vector<int>& clean = ds.labels(LabelChannel::Clean);
        const std::vector<std::size_t> rows = ds.rows_with(tag_from(split_name));
        for (std::size_t r : rows) hits += predict(c, ds.row(r)) == clean[r];
        return rows.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(rows.size());
      }, py::arg("ds"), py::arg("split") = "test");
  m.def("init_classifier",
        [](const std::string& arch, std::size_t d, std::size_t hidden, std::size_t outputs,
           std::uint64_t seed) {
          if (arch != "linear" && arch != "mlp") raise(ErrorCode::BadArch, "arch must be linear or mlp");
          return init_classifier(arch == "linear" ? Arch::linear(d, outputs) : Arch::mlp(d, hidden, outputs),
                                 seed);
        },
        py::arg("arch"), py::arg("d"), py::arg("hidden") = 32, py::arg("outputs") = 1, py::arg("seed") = 0);

  m.def("run_suite",
        [](const std::string& name, std::uint64_t seed, std::size_t instances) {
          py::list out;
          for (const SuiteReport& r : run_suite(name, seed, instances)) {
            py::dict d;
            d["theorem"] = r.theorem;
            d["instances"] = r.instances;
            d["max_residual"] = r.max_residual;
            d["pass"] = r.pass;
            out.append(d);
          }
          return out;
        },
        py::arg("name"), py::arg("seed"), py::arg("instances") = 0);

  m.def("dispatch",
        [](const std::vector<std::string>& args) {
          std::ostringstream out, err;
          int code = 0;
          {
            py::gil_scoped_release release;
            code = dispatch(args, out, err);
          }
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"));
}
