// Python bindings: configs, experiments and the gradient checks.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "brpath/config.hpp"
#include "brpath/experiments.hpp"
#include "brpath/inequalities.hpp"
#include "brpath/metricspace.hpp"

namespace py = pybind11;
using namespace brpath;

namespace {

geo::Point start(const geo::ManifoldModel& m, const std::vector<double>& x) {
  if (x.empty()) return m.origin();
  return m.point(Eigen::Map<const geo::Vec>(x.data(), static_cast<Eigen::Index>(x.size())));
}

ExperimentConfig parse_or_raise(const std::string& text) {
  auto r = parse_config(text);
  if (!r.ok()) {
    std::ostringstream os;
    for (const auto& e : r.errors) os << e.format() << '\n';
    throw py::value_error(os.str());
  }
  return *r.config;
}

ineq::Estimator estimator(const std::string& name) {
  if (name == "bismut") return ineq::Estimator::Bismut;
  if (name == "fd") return ineq::Estimator::FiniteDifference;
  throw py::value_error("estimator must be 'bismut' or 'fd'");
}

}  // namespace

PYBIND11_MODULE(_brpath, m) {
  m.doc() = "Monte Carlo checks of path-space curvature inequalities";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);

  py::class_<ineq::VerdictReport>(m, "VerdictReport")
      .def_readonly("inequality", &ineq::VerdictReport::inequality)
      .def_readonly("model", &ineq::VerdictReport::model)
      .def_readonly("testfn", &ineq::VerdictReport::testfn)
      .def_readonly("kappa", &ineq::VerdictReport::kappa)
      .def_property_readonly("lhs", [](const ineq::VerdictReport& r) { return r.lhs.mean; })
      .def_property_readonly("lhs_se", [](const ineq::VerdictReport& r) { return r.lhs.se; })
      .def_property_readonly("rhs", [](const ineq::VerdictReport& r) { return r.rhs.mean; })
      .def_property_readonly("rhs_se", [](const ineq::VerdictReport& r) { return r.rhs.se; })
      .def_readonly("margin", &ineq::VerdictReport::margin)
      .def_readonly("n_paths", &ineq::VerdictReport::n_paths)
      .def_property_readonly("verdict",
                             [](const ineq::VerdictReport& r) { return std::string(mc::to_string(r.verdict)); })
      .def("__repr__", [](const ineq::VerdictReport& r) {
        return "<VerdictReport " + r.inequality + " " + std::string(mc::to_string(r.verdict)) + ">";
      });

  m.def("experiment_ids", &experiment_ids);

  m.def(
      "validate_config",
      [](const std::string& text) {
        std::vector<std::string> out;
        for (const auto& e : parse_config(text).errors) out.push_back(e.format());
        return out;
      },
      py::arg("text"), "Error lines for a config; empty when valid.");

  m.def(
      "run_experiment",
      [](const std::string& text) {
        const ExperimentConfig cfg = parse_or_raise(text);
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(cfg);
        }
        return py::make_tuple(r.csv, std::string(mc::to_string(r.verdict)), exit_code(r.verdict));
      },
      py::arg("text"), "Runs a config; returns (csv, verdict, exit_code).");

  m.def(
      "exact_kappa", [](const std::string& spec) { return exact_kappa(geo::ManifoldModel::parse(spec)); },
      py::arg("model"));

  auto gradient = [](bool squared) {
    return [squared](const std::string& model, double kappa, const std::string& testfn, std::size_t n_paths,
                     std::uint64_t seed, const std::vector<double>& x, const std::string& est) {
      const auto mdl = geo::ManifoldModel::parse(model);
      const auto F = cyl::CylinderFunction::parse(testfn);
      const mc::StreamKey key{seed, mc::tag_of(squared ? "r3" : "r2"), 0, 0};
      py::gil_scoped_release release;
      return squared ? ineq::check_r3(mdl, kappa, F, start(mdl, x), n_paths, key, estimator(est))
                     : ineq::check_r2(mdl, kappa, F, start(mdl, x), n_paths, key, estimator(est));
    };
  };
  m.def("check_r2", gradient(false), py::arg("model"), py::arg("kappa"), py::arg("testfn"),
        py::arg("n_paths") = 10000, py::arg("seed") = 1, py::arg("x") = std::vector<double>{},
        py::arg("estimator") = "bismut");
  m.def("check_r3", gradient(true), py::arg("model"), py::arg("kappa"), py::arg("testfn"),
        py::arg("n_paths") = 10000, py::arg("seed") = 1, py::arg("x") = std::vector<double>{},
        py::arg("estimator") = "bismut");

  m.def(
      "cone_holonomy",
      [](double l, double radius, int sides, int turns) { return metric::ConeSpace(l).holonomy(radius, sides, turns); },
      py::arg("l"), py::arg("radius") = 1.0, py::arg("sides") = 0, py::arg("turns") = 1);

  m.def(
      "cone_distance",
      [](double l, std::pair<double, double> p, std::pair<double, double> q) {
        const metric::ConeSpace c(l);
        return c.distance(c.point(p.first, p.second), c.point(q.first, q.second));
      },
      py::arg("l"), py::arg("p"), py::arg("q"), "Distance between polar points (r, theta).");
}
