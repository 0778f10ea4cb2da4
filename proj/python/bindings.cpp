#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "isodelay/builtins.hpp"
#include "isodelay/cli.hpp"
#include "isodelay/ocp.hpp"
#include "isodelay/serialize.hpp"
#include "isodelay/solver.hpp"

namespace py = pybind11;
using namespace isodelay;

namespace {

using Doubles = std::vector<double>;

// keys of a point dict: t, q, qd, qtau, qdtau, u, utau, p, lambda
PointData point_from(const py::dict& d) {
  PointData x;
  auto grab = [&](const char* key, Doubles& dst) {
    if (d.contains(key)) dst = d[key].cast<Doubles>();
  };
  if (d.contains("t")) x.t = d["t"].cast<double>();
  grab("q", x.q);
  grab("qd", x.qd);
  grab("qtau", x.qtau);
  grab("qdtau", x.qdtau);
  grab("u", x.u);
  grab("utau", x.utau);
  grab("p", x.p);
  grab("lambda", x.lambda);
  return x;
}

SlotSpace space_from(const std::string& mode, int n, int m, int k) { return {parse_mode(mode), n, m, k}; }

Slot slot_from(const std::string& name, const SlotSpace& space) {
  const Expression e = parse_expression(name, space);
  if (e.free_slots().size() != 1 || e.to_string() != to_string(e.free_slots()[0]))
    throw ValidationError("slot", "'" + name + "' is not a single argument slot");
  return e.free_slots()[0];
}

MultiplierVector multipliers(const Doubles& values) { return MultiplierVector(values); }

ConditionOptions options(double tolerance) {
  ConditionOptions o;
  o.tolerance = tolerance;
  return o;
}

std::string dump(const nlohmann::json& j) { return j.dump(); }

std::string dump_reports(const std::vector<ConditionReport>& reps) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : reps) out.push_back(to_json(r));
  return out.dump();
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "Compiled core of isodelay";
  mod.attr("__version__") = kToolVersion;

  // translators run newest first, so the catch-all base goes in before the subclasses
  static py::exception<Error> base(mod, "Error", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });
  py::register_exception<ParseError>(mod, "ParseError", base.ptr());
  py::register_exception<DomainError>(mod, "DomainError", base.ptr());
  py::register_exception<ValidationError>(mod, "ValidationError", base.ptr());

  // expressions
  mod.def(
      "canonical",
      [](const std::string& src, const std::string& mode, int n, int m, int k) {
        return parse_expression(src, space_from(mode, n, m, k)).to_string();
      },
      py::arg("source"), py::arg("mode") = "lagrangian", py::arg("n") = 1, py::arg("m") = 0, py::arg("k") = 0);
  mod.def(
      "evaluate",
      [](const std::string& src, const py::dict& point, const std::string& mode, int n, int m, int k) {
        const PointData x = point_from(point);
        return evaluate(parse_expression(src, space_from(mode, n, m, k)), x.view());
      },
      py::arg("source"), py::arg("point"), py::arg("mode") = "lagrangian", py::arg("n") = 1, py::arg("m") = 0,
      py::arg("k") = 0);
  mod.def(
      "partial",
      [](const std::string& src, const std::string& slot, const py::dict& point, const std::string& mode, int n, int m,
         int k) {
        const SlotSpace space = space_from(mode, n, m, k);
        const PointData x = point_from(point);
        return partial(parse_expression(src, space), slot_from(slot, space), x.view());
      },
      py::arg("source"), py::arg("slot"), py::arg("point"), py::arg("mode") = "lagrangian", py::arg("n") = 1,
      py::arg("m") = 0, py::arg("k") = 0);

  py::class_<DelayedProblem>(mod, "Problem")
      .def_static("from_json", [](const std::string& text) { return parse_problem(text); })
      .def_static("load", [](const std::string& path) { return load_problem(path); })
      .def_static("builtin", [](const std::string& name) { return builtin_problem(name); })
      .def_readonly("name", &DelayedProblem::name)
      .def_readonly("n", &DelayedProblem::n)
      .def_readonly("k", &DelayedProblem::k)
      .def_readonly("m", &DelayedProblem::m)
      .def_readonly("tau", &DelayedProblem::tau)
      .def_readonly("t1", &DelayedProblem::t1)
      .def_readonly("t2", &DelayedProblem::t2)
      .def_readonly("levels", &DelayedProblem::levels)
      .def_property_readonly("mode", [](const DelayedProblem& p) { return std::string(to_string(p.mode)); })
      .def_property_readonly("lagrangian", [](const DelayedProblem& p) { return p.lagrangian.to_string(); })
      .def("to_json", &problem_to_json)
      .def("control_form", &to_control_form)
      .def("__repr__", [](const DelayedProblem& p) { return "<Problem " + p.name + ">"; });

  py::class_<Trajectory>(mod, "Trajectory")
      .def_static("from_csv", &read_trajectory_csv, py::arg("text"), py::arg("n"), py::arg("m") = 0)
      .def_static("load_csv", [](const std::string& path, int n, int m) { return load_trajectory_csv(path, n, m); },
                  py::arg("path"), py::arg("n"), py::arg("m") = 0)
      .def("to_csv", &trajectory_to_csv)
      .def_readonly("t_start", &Trajectory::t_start)
      .def_readonly("h", &Trajectory::h)
      .def_readonly("n", &Trajectory::n)
      .def_readonly("m", &Trajectory::m)
      .def_readwrite("q", &Trajectory::q)
      .def_readwrite("u", &Trajectory::u)
      .def_readwrite("p", &Trajectory::p)
      .def_readwrite("kink_set", &Trajectory::kink_set)
      .def_property_readonly("nodes", &Trajectory::nodes)
      .def("times", [](const Trajectory& tr) {
        Doubles t(static_cast<std::size_t>(tr.nodes()));
        for (int i = 0; i < tr.nodes(); ++i) t[static_cast<std::size_t>(i)] = tr.time(i);
        return t;
      });

  mod.def("builtin_names", &builtin_names);
  mod.def("builtin_extremal", &builtin_extremal, py::arg("name"), py::arg("intervals"));
  mod.def("linear_initial_guess", &linear_initial_guess, py::arg("problem"), py::arg("intervals"));
  mod.def(
      "reduction_costate",
      [](const DelayedProblem& p, const Doubles& lam, const Trajectory& tr) {
        return reduction_costate(p, multipliers(lam), tr);
      },
      py::arg("problem"), py::arg("lam"), py::arg("traj"));
  mod.def(
      "functional_value",
      [](const DelayedProblem& p, const Trajectory& tr) {
        const FunctionalValues v = functional_value(p, tr);
        return py::make_tuple(v.objective, v.constraints);
      },
      py::arg("problem"), py::arg("traj"));

  // solver: (result json, trajectory)
  mod.def(
      "solve",
      [](const DelayedProblem& p, int intervals, double inner_tolerance, double outer_tolerance, int max_outer,
         const Doubles& initial_lambda, const std::string& update) {
        SolveSettings s;
        s.intervals = intervals;
        s.inner_tolerance = inner_tolerance;
        s.outer_tolerance = outer_tolerance;
        s.max_outer = max_outer;
        s.initial_lambda = initial_lambda;
        if (update == "secant") s.update = MultiplierUpdate::secant;
        else if (update != "first_order") throw ValidationError("update", "expected first_order or secant");
        SolveResult r;
        {
          py::gil_scoped_release release;
          r = solve_isoperimetric(p, s);
        }
        return py::make_tuple(dump(to_json(r)), r.trajectory);
      },
      py::arg("problem"), py::arg("intervals") = 60, py::arg("inner_tolerance") = 1e-10,
      py::arg("outer_tolerance") = 1e-10, py::arg("max_outer") = 60, py::arg("initial_lambda") = Doubles{},
      py::arg("update") = "first_order");

  // conditions: reports as json text
  mod.def(
      "el_residual",
      [](const DelayedProblem& p, const Doubles& lam, const Trajectory& tr, double tol) {
        return dump(to_json(el_residual(p, multipliers(lam), tr, options(tol))));
      },
      py::arg("problem"), py::arg("lam"), py::arg("traj"), py::arg("tolerance") = 1e-8);
  mod.def(
      "cdur_residual",
      [](const DelayedProblem& p, const Doubles& lam, const Trajectory& tr, double tol) {
        return dump(to_json(cdur_residual(p, multipliers(lam), tr, options(tol))));
      },
      py::arg("problem"), py::arg("lam"), py::arg("traj"), py::arg("tolerance") = 1e-8);
  mod.def(
      "dbr_residual",
      [](const DelayedProblem& p, const Doubles& lam, const Trajectory& tr, double tol) {
        return dump(to_json(dbr_residual(p, multipliers(lam), tr, options(tol))));
      },
      py::arg("problem"), py::arg("lam"), py::arg("traj"), py::arg("tolerance") = 1e-8);
  mod.def(
      "noether_constant",
      [](const DelayedProblem& p, const Doubles& lam, const Trajectory& tr, const std::string& eta,
         std::vector<std::string> xi, const std::string& gauge) {
        if (xi.empty()) xi.assign(static_cast<std::size_t>(p.n), "0");
        return dump(to_json(noether_constant(p, multipliers(lam), tr, Symmetry::parse(eta, xi, gauge, p))));
      },
      py::arg("problem"), py::arg("lam"), py::arg("traj"), py::arg("eta") = "1",
      py::arg("xi") = std::vector<std::string>{}, py::arg("gauge") = "0");
  mod.def(
      "invariance_residual",
      [](const DelayedProblem& p, const Doubles& lam, const Trajectory& tr, const std::string& eta,
         std::vector<std::string> xi, const std::string& gauge, std::optional<std::pair<double, double>> sub) {
        if (xi.empty()) xi.assign(static_cast<std::size_t>(p.n), "0");
        std::optional<Subinterval> s;
        if (sub) s = Subinterval{sub->first, sub->second};
        return invariance_residual(p, multipliers(lam), Symmetry::parse(eta, xi, gauge, p), tr, s);
      },
      py::arg("problem"), py::arg("lam"), py::arg("traj"), py::arg("eta") = "1",
      py::arg("xi") = std::vector<std::string>{}, py::arg("gauge") = "0", py::arg("subinterval") = py::none());
  mod.def(
      "abnormality_check",
      [](const DelayedProblem& p, const Trajectory& tr, double tol) {
        return dump(to_json(abnormality_check(p, tr, options(tol))));
      },
      py::arg("problem"), py::arg("traj"), py::arg("tolerance") = 1e-8);

  // control form
  mod.def(
      "pontryagin_residuals",
      [](const DelayedProblem& p, const Doubles& lam, const Trajectory& tr, double tol) {
        const HamiltonianContext ctx(p, multipliers(lam));
        return dump_reports(pontryagin_residuals(ctx, tr, options(tol)));
      },
      py::arg("problem"), py::arg("lam"), py::arg("traj"), py::arg("tolerance") = 1e-8);
  mod.def(
      "hamiltonian_dbr_residual",
      [](const DelayedProblem& p, const Doubles& lam, const Trajectory& tr, double tol) {
        const HamiltonianContext ctx(p, multipliers(lam));
        return dump(to_json(hamiltonian_dbr_residual(ctx, tr, options(tol))));
      },
      py::arg("problem"), py::arg("lam"), py::arg("traj"), py::arg("tolerance") = 1e-8);
}
