#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "fbflow/cli.hpp"
#include "fbflow/expr.hpp"
#include "fbflow/linearfb.hpp"
#include "fbflow/profiles.hpp"

namespace py = pybind11;
using namespace fbflow;

namespace {

py::array_t<double> as_array(const Field& u) {
  const Grid& g = *u.grid();
  py::array_t<double> out({g.nx(), g.ny()});
  auto m = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < g.nx(); ++i)
    for (std::size_t k = 0; k < g.ny(); ++k) m(py::ssize_t(i), py::ssize_t(k)) = u.at(i, k);
  return out;
}

py::dict solve_shear(std::size_t nx, std::size_t ny, const std::string& f, const std::string& delta0,
                     const std::string& delta1, bool graded) {
  const GridPtr g = build_grid(Domain(0.0, 1.0), nx, ny, graded ? Grading::corner() : Grading::uniform());
  const Expression ef(f), e0(delta0), e1(delta1);
  LinearProblem p{CoefficientSet::shear(g), DataTriple::zero(g)};
  p.data.f = Field::from_function(g, [&](double x, double y) { return ef(x, y); });
  p.data.delta0 = Trace::from_function(*g, Edge::Sigma0, [&](double y) { return e0(0.0, y); });
  p.data.delta1 = Trace::from_function(*g, Edge::Sigma1, [&](double y) { return e1(1.0, y); });
  const LinearSolution s = solve_linear(p);
  py::dict d;
  d["x"] = g->x();
  d["y"] = g->y();
  d["u"] = as_array(s.u);
  d["residual_inf"] = s.stats.residual_inf;
  return d;
}

std::string run_json(const std::string& subcommand, const std::string& config_json, const std::string& out_dir) {
  const RunConfig cfg = parse_config(nlohmann::json::parse(config_json));
  std::ostringstream log;
  nlohmann::json rep = run_config(subcommand, cfg, out_dir, true, 1, log);
  rep["config_hash"] = cfg.hash;
  return rep.dump();
}

}  // namespace

PYBIND11_MODULE(_fbflow, m) {
  static py::exception<Error> config_error(m, "ConfigError");
  static py::exception<Error> numerical_error(m, "NumericalError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Config)
        config_error(e.what());
      else
        numerical_error(e.what());
    }
  });

  m.def("eval_expression", &expression_eval, py::arg("text"), py::arg("x"), py::arg("y"));
  m.def(
      "g0", [](double t) { return g0_default().value(t); }, py::arg("t"),
      "Normalized self-similar profile G0 (ODE route).");
  m.def("solve_shear", &solve_shear, py::arg("nx"), py::arg("ny"), py::arg("f"), py::arg("delta0") = "0",
        py::arg("delta1") = "0", py::arg("graded") = true,
        "Solves y u_x - u_yy = f on (0,1) x (-1,1) with inflow traces given as expressions.");
  m.def("run_config", &run_json, py::arg("subcommand"), py::arg("config_json"), py::arg("out_dir"),
        "Runs one subcommand in reference mode and returns the report as a JSON string.");
}
