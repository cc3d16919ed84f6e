#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hydra/cli.h"
#include "hydra/geometry.h"
#include "hydra/matching.h"
#include "hydra/metrics.h"
#include "hydra/o2m.h"

namespace py = pybind11;
using namespace hydra;

namespace {

CostMatrix to_matrix(const std::vector<std::vector<double>>& rows) {
  return CostMatrix::from_rows(rows);
}

}  // namespace

PYBIND11_MODULE(_hydra, m) {
  m.doc() = "Hybrid relation assignment core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NonFiniteLossError>(m, "NonFiniteLossError", PyExc_RuntimeError);

  py::class_<NormBox>(m, "NormBox")
      .def(py::init([](double cx, double cy, double w, double h) {
             return NormBox{cx, cy, w, h};
           }),
           py::arg("cx"), py::arg("cy"), py::arg("w"), py::arg("h"))
      .def_static("from_corners",
                  py::overload_cast<double, double, double, double>(&NormBox::from_corners))
      .def_readwrite("cx", &NormBox::cx)
      .def_readwrite("cy", &NormBox::cy)
      .def_readwrite("w", &NormBox::w)
      .def_readwrite("h", &NormBox::h)
      .def("as_tuple", [](const NormBox& b) { return py::make_tuple(b.cx, b.cy, b.w, b.h); })
      .def("__eq__", [](const NormBox& a, const NormBox& b) { return a == b; })
      .def("__repr__", [](const NormBox& b) {
        return "NormBox(" + std::to_string(b.cx) + ", " + std::to_string(b.cy) + ", " +
               std::to_string(b.w) + ", " + std::to_string(b.h) + ")";
      });

  m.def("iou", &iou);
  m.def("giou", &giou);
  m.def("union_box", &union_box);

  m.def(
      "hungarian",
      [](const std::vector<std::vector<double>>& cost) {
        const O2OAssignment a = hungarian(to_matrix(cost));
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (const auto& p : a.pairs) pairs.emplace_back(p.gt, p.query);
        return py::make_tuple(pairs, a.total_cost);
      },
      py::arg("cost"), "Rows are ground truths. Returns ([(gt, query)], total cost).");

  py::class_<GtTriplet>(m, "GtTriplet")
      .def(py::init([](int sub_class, int rel_class, int obj_class, NormBox sub_box,
                       NormBox obj_box) {
             GtTriplet t;
             t.sub_class = sub_class;
             t.rel_class = rel_class;
             t.obj_class = obj_class;
             t.sub_box = sub_box;
             t.obj_box = obj_box;
             return t;
           }),
           py::arg("sub_class"), py::arg("rel_class"), py::arg("obj_class"),
           py::arg("sub_box"), py::arg("obj_box"));

  py::class_<PredTriplet>(m, "PredTriplet")
      .def(py::init([](std::vector<double> p_sub, std::vector<double> p_obj,
                       std::vector<double> p_rel, NormBox sub_box, NormBox obj_box) {
             return PredTriplet{std::move(p_sub), std::move(p_obj), std::move(p_rel), sub_box,
                                obj_box};
           }),
           py::arg("p_sub"), py::arg("p_obj"), py::arg("p_rel"), py::arg("sub_box"),
           py::arg("obj_box"));

  m.def("score_o2m", &score_o2m, py::arg("gt"), py::arg("pred"));
  m.def(
      "select_o2m",
      [](const std::vector<std::vector<double>>& scores, double threshold, std::size_t k,
         bool normalized) {
        O2MConfig cfg;
        cfg.threshold = threshold;
        cfg.k = k;
        cfg.mode = normalized ? ThresholdMode::kNormalized : ThresholdMode::kRaw;
        std::vector<std::tuple<std::size_t, std::size_t, double>> out;
        for (const auto& p : select_o2m(to_matrix(scores), cfg).pairs) {
          out.emplace_back(p.gt, p.query, p.score);
        }
        return out;
      },
      py::arg("scores"), py::arg("threshold") = 0.4, py::arg("k") = 6,
      py::arg("normalized") = false,
      "Rows are ground truths. Returns [(gt, query, score)], best first per gt.");

  m.def("f_recall", &f_recall, py::arg("recall"), py::arg("mean_recall"));
  m.def("score_wtd", &score_wtd, py::arg("r50"), py::arg("wmap_rel"), py::arg("wmap_phr"));
  m.def("average_precision", &average_precision, py::arg("hits"), py::arg("n_gt"));

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_static("parse", &RunConfig::parse)
      .def_static("load", &RunConfig::load)
      .def("set", &RunConfig::set)
      .def("validate", &RunConfig::validate)
      .def("dump", &RunConfig::dump)
      .def_readwrite("out_dir", &RunConfig::out_dir)
      .def_readwrite("train_path", &RunConfig::train_path)
      .def_readwrite("val_path", &RunConfig::val_path)
      .def_readwrite("test_path", &RunConfig::test_path)
      .def_readwrite("epochs", &RunConfig::epochs)
      .def_readwrite("seed", &RunConfig::seed);

  m.def("gen_data", &cmd_gen_data, py::arg("config"), "Returns the manifest JSON.");
  m.def(
      "train",
      [](const RunConfig& cfg) {
        const TrainResult r = cmd_train(cfg);
        std::vector<std::string> log;
        for (const auto& e : r.log) log.push_back(e.to_json());
        return py::make_tuple(r.best_epoch, log);
      },
      py::arg("config"), "Returns (best_epoch, per-epoch JSON lines).");
  m.def(
      "evaluate",
      [](const RunConfig& cfg, const std::string& checkpoint, const std::string& dataset) {
        return cmd_eval(cfg, checkpoint, dataset).to_json();
      },
      py::arg("config"), py::arg("checkpoint"), py::arg("dataset"));
  m.def(
      "analyze",
      [](const RunConfig& cfg, const std::string& checkpoint, const std::string& dataset) {
        return cmd_analyze(cfg, checkpoint, dataset).to_json();
      },
      py::arg("config"), py::arg("checkpoint"), py::arg("dataset"));
}
