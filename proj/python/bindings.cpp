#include <sstream>

#include <nlohmann/json.hpp>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "stochsafe/certify.hpp"
#include "stochsafe/config.hpp"
#include "stochsafe/mcsim.hpp"

namespace py = pybind11;
using namespace stochsafe;

namespace {

SafetyProblem load(const std::string& path, std::optional<double> r0, std::optional<double> T,
                   std::optional<std::vector<double>> x0) {
  SafetyProblem p = load_problem(path);
  if (r0) p = with_initial_radius(p, *r0);
  if (T) p = with_horizon(p, *T);
  if (x0) p = with_initial_point(p, *x0);
  return p;
}

std::string solve(const SafetyProblem& p, int order, Variant variant, bool allow_inexact) {
  SolvedOrder s;
  {
    py::gil_scoped_release release;
    s = solve_order(p, order, variant);
  }
  auto c = extract_certificate(s, allow_inexact);
  c.report = verify_certificate(c, p, s);
  nlohmann::json j = bound_record(c, s);
  j["certificate"] = to_json(c);
  if (p.X0.center) j["v_x0"] = c.v.evaluate(p.point(p.t0, *p.X0.center));
  return j.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Certified unsafe-probability bounds for polynomial stochastic systems";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<CertificateError>(m, "CertificateError", PyExc_RuntimeError);

  py::class_<SafetyProblem>(m, "Problem")
      .def_readonly("name", &SafetyProblem::name)
      .def_readonly("t0", &SafetyProblem::t0)
      .def_readonly("T", &SafetyProblem::T)
      .def_property_readonly("num_states", &SafetyProblem::num_states)
      .def("__repr__", [](const SafetyProblem& p) {
        return "<Problem " + p.name + " with " + std::to_string(p.num_states()) + " states>";
      });

  m.def("load_problem", &load, py::arg("path"), py::arg("r0") = py::none(), py::arg("T") = py::none(),
        py::arg("x0") = py::none());

  m.def(
      "_bound",
      [](const SafetyProblem& p, int order, bool allow_inexact) {
        return solve(p, order, Variant::UnsafeBound, allow_inexact);
      },
      py::arg("problem"), py::arg("order"), py::arg("allow_inexact") = false);

  m.def(
      "_risk",
      [](const SafetyProblem& p, int order, bool allow_inexact) {
        return solve(p, order, Variant::RiskContour, allow_inexact);
      },
      py::arg("problem"), py::arg("order"), py::arg("allow_inexact") = false);

  m.def(
      "_simulate",
      [](const SafetyProblem& p, long n, std::uint64_t seed, std::optional<double> dt) {
        mc::SimConfig cfg;
        cfg.n = n;
        cfg.seed = seed;
        cfg.dt = dt;
        py::gil_scoped_release release;
        return mc::to_json(mc::estimate_unsafe(p, cfg)).dump();
      },
      py::arg("problem"), py::arg("n") = 5000, py::arg("seed") = 0, py::arg("dt") = py::none());

  m.def(
      "export_sdpa",
      [](const SafetyProblem& p, int order, bool risk) {
        const auto [q, rec] = scale_problem(p);
        const auto prog = risk ? build_risk_sdp(q, order) : build_unsafe_sdp(q, order);
        std::ostringstream out;
        const auto man = sdp::export_sdpa(prog.sdp, out);
        return py::make_tuple(out.str(), man.to_json());
      },
      py::arg("problem"), py::arg("order"), py::arg("risk") = false,
      "SDPA sparse text and its manifest JSON for one order.");

  m.def("clopper_pearson", &mc::clopper_pearson, py::arg("k"), py::arg("n"), py::arg("confidence") = 0.99);
}
