#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gconv/config.hpp"
#include "gconv/run.hpp"

namespace py = pybind11;
using namespace gconv;

namespace {

Box to_box(const std::vector<std::pair<double, double>>& axes) { return Box(axes); }

Point to_point(const Eigen::VectorXd& v) {
  if (v.size() < 1 || v.size() > kMaxDim) throw ContractViolation("point dimension out of range");
  return Point(v);
}

Eigen::VectorXd from_point(const Point& x) { return Eigen::VectorXd(x); }

py::dict report_dict(const SolveReport& r) {
  py::dict d;
  d["iterations"] = r.iterations;
  d["steps"] = r.steps;
  d["converged"] = r.converged;
  d["residual_bound"] = r.residual_bound;
  d["residual_dual"] = r.residual_dual;
  d["tol"] = r.tol;
  d["apriori_ok"] = r.apriori_ok;
  d["norm"] = r.norm;
  d["bound"] = r.bound;
  d["wall_time"] = r.wall_time;
  return d;
}

/// Accepts a number, a callable f(x) or an array of nodal values.
DiscreteFunction to_function(const Grid& grid, const py::object& data) {
  if (py::isinstance<py::float_>(data) || py::isinstance<py::int_>(data)) {
    const double c = data.cast<double>();
    return DiscreteFunction::sample(grid, [c](const Point&) { return c; }, true);
  }
  if (PyCallable_Check(data.ptr())) {
    auto fn = data.cast<std::function<double(Eigen::VectorXd)>>();
    Eigen::VectorXd values(static_cast<Eigen::Index>(grid.node_count()));
    for (std::size_t i = 0; i < grid.node_count(); ++i) {
      values[static_cast<Eigen::Index>(i)] = grid.is_boundary(i) ? 0.0 : fn(from_point(grid.node_point(i)));
    }
    return DiscreteFunction(grid, values, true);
  }
  Eigen::VectorXd values = data.cast<Eigen::VectorXd>();
  if (static_cast<std::size_t>(values.size()) != grid.node_count()) {
    throw ContractViolation("nodal array has " + std::to_string(values.size()) + " entries, grid has " +
                            std::to_string(grid.node_count()));
  }
  return DiscreteFunction(grid, values, false).pinned();
}

SolverOptions options_from(const py::dict& kw) {
  SolverOptions o;
  if (kw.contains("tol")) o.tol = kw["tol"].cast<double>();
  if (kw.contains("max_iter")) o.max_iter = kw["max_iter"].cast<int>();
  if (kw.contains("damping")) o.damping = kw["damping"].cast<double>();
  if (kw.contains("check_structure")) o.check_structure = kw["check_structure"].cast<bool>();
  return o;
}

}  // namespace

PYBIND11_MODULE(_gconv, m) {
  m.doc() = "Monotone operators in X-divergence form: solvers and G-convergence checks";
  m.attr("__version__") = version();

  static py::exception<Error> base_error(m, "GconvError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const ContractViolation& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const Error& e) {
      py::set_error(base_error, e.what());
    }
  });

  py::class_<VectorFieldFamily>(m, "VectorFieldFamily")
      .def_property_readonly("name", &VectorFieldFamily::name)
      .def_property_readonly("n", &VectorFieldFamily::n)
      .def_property_readonly("m", &VectorFieldFamily::m)
      .def("coeff", [](const VectorFieldFamily& f, const Eigen::VectorXd& x) {
        return Eigen::MatrixXd(f.coeff(to_point(x)));
      })
      .def("rank", [](const VectorFieldFamily& f, const Eigen::VectorXd& x) {
        return coefficient_rank(f, to_point(x));
      })
      .def("__repr__", [](const VectorFieldFamily& f) { return "<VectorFieldFamily " + f.name() + ">"; });

  m.def("make_family", py::overload_cast<std::string_view>(&make_family), py::arg("spec"),
        "euclidean:<n>, grushin or heisenberg");

  py::class_<ClassParams>(m, "ClassParams")
      .def(py::init<double, double, double>(), py::arg("alpha"), py::arg("beta"), py::arg("p"))
      .def_readonly("alpha", &ClassParams::alpha)
      .def_readonly("beta", &ClassParams::beta)
      .def_readonly("p", &ClassParams::p)
      .def("beta_prime", &ClassParams::beta_prime)
      .def("conjugate", &ClassParams::conjugate);
  m.def("beta_prime", py::overload_cast<const ClassParams&>(&beta_prime));

  py::class_<MonotoneMap>(m, "MonotoneMap")
      .def_property_readonly("params", &MonotoneMap::params)
      .def_property_readonly("description", &MonotoneMap::description)
      .def_property_readonly("periodic", &MonotoneMap::periodic)
      .def("__call__", [](const MonotoneMap& a, const Eigen::VectorXd& x, double t, const Eigen::VectorXd& xi) {
        return Eigen::VectorXd(a(to_point(x), t, Vec(xi)));
      }, py::arg("x"), py::arg("t"), py::arg("xi"));

  m.def("p_laplacian", [](double p, const std::string& weight) { return make_p_laplacian(p, parse_weight(weight)); },
        py::arg("p"), py::arg("weight") = "constant:1",
        "w(x)|xi|^(p-2) xi; weight is constant:<c>, sine:<mean>,<amp>, two_phase:<w1>,<w2> or table:<v>,...");
  m.def("oscillating", &make_oscillating, py::arg("base"), py::arg("h"));
  m.def("shifted", &make_shifted, py::arg("base"), py::arg("shift"));

  m.def("verify_structure",
        [](const MonotoneMap& a, const std::vector<std::pair<double, double>>& box, int dim_m, int n_pairs,
           double tol, std::uint64_t seed) {
          StructureOptions so;
          so.n_pairs = n_pairs;
          so.tol = tol;
          so.seed = seed;
          const auto rep = verify_structure(a, to_box(box), dim_m, so);
          py::dict out;
          for (int c = 0; c < 4; ++c) {
            const auto& res = rep.conditions[static_cast<std::size_t>(c)];
            py::dict e;
            e["passed"] = res.passed;
            if (res.worst) {
              e["margin"] = res.worst->margin;
              e["x"] = from_point(res.worst->x);
              e["xi"] = Eigen::VectorXd(res.worst->xi);
              e["eta"] = Eigen::VectorXd(res.worst->eta);
            }
            out[condition_name(Condition(c))] = e;
          }
          out["empirical_alpha"] = rep.empirical_alpha;
          out["empirical_beta"] = rep.empirical_beta;
          out["all_passed"] = rep.all_passed();
          return out;
        },
        py::arg("a"), py::arg("box"), py::arg("m"), py::arg("n_pairs") = 10000, py::arg("tol") = 1e-8,
        py::arg("seed") = kDefaultSeed);

  py::class_<Grid>(m, "Grid")
      .def(py::init([](const std::vector<std::pair<double, double>>& box, int n) { return Grid(to_box(box), n); }),
           py::arg("box"), py::arg("n"))
      .def_property_readonly("dim", &Grid::dim)
      .def_property_readonly("node_count", &Grid::node_count)
      .def("nodes", [](const Grid& g) {
        Eigen::MatrixXd out(static_cast<Eigen::Index>(g.node_count()), g.dim());
        for (std::size_t i = 0; i < g.node_count(); ++i) {
          out.row(static_cast<Eigen::Index>(i)) = from_point(g.node_point(i)).transpose();
        }
        return out;
      });

  m.def("solve_elliptic",
        [](const VectorFieldFamily& family, const MonotoneMap& a, const Grid& grid, const py::object& g,
           const py::kwargs& kw) {
          const MonotoneSolver solver(family, grid, options_from(kw));
          const auto datum = to_function(grid, g);
          std::pair<DiscreteFunction, SolveReport> res;
          {
            py::gil_scoped_release release;
            res = solver.solve_elliptic(a, datum);
          }
          return py::make_tuple(Eigen::VectorXd(res.first.values()), report_dict(res.second));
        },
        py::arg("family"), py::arg("a"), py::arg("grid"), py::arg("g"),
        "Returns (nodal values, report). Extra keywords: tol, max_iter, damping, check_structure.");

  m.def("solve_parabolic",
        [](const VectorFieldFamily& family, const MonotoneMap& a, const Grid& grid, const py::object& f,
           const py::object& phi, double T, int K, const py::kwargs& kw) {
          const MonotoneSolver solver(family, grid, options_from(kw));
          const auto source = to_function(grid, f);
          const auto initial = to_function(grid, phi);
          std::pair<Trajectory, SolveReport> res;
          {
            py::gil_scoped_release release;
            res = solver.solve_parabolic(a, {source}, initial, T, K);
          }
          Eigen::MatrixXd states(static_cast<Eigen::Index>(res.first.size()),
                                 static_cast<Eigen::Index>(grid.node_count()));
          for (std::size_t k = 0; k < res.first.size(); ++k) {
            states.row(static_cast<Eigen::Index>(k)) = res.first.states[k].values().transpose();
          }
          return py::make_tuple(res.first.times, states, report_dict(res.second));
        },
        py::arg("family"), py::arg("a"), py::arg("grid"), py::arg("f"), py::arg("phi"), py::arg("T"),
        py::arg("K"), "Returns (times, states[k, node], report).");

  m.def("homogenized_weight_1d",
        [](const std::string& weight, double p) { return homogenized_weight_1d(parse_weight(weight), p); },
        py::arg("weight"), py::arg("p") = 2.0);

  m.def("extract_effective_coefficient_1d",
        [](const std::string& weight, double p, int h, int n, const std::vector<double>& xi) {
          const auto family = make_family("euclidean:1");
          const Grid grid(Box::unit(1), n);
          std::vector<EffectiveSample> res;
          {
            py::gil_scoped_release release;
            res = extract_effective_coefficient_1d(family, make_p_laplacian(p, parse_weight(weight)), h, grid, xi);
          }
          py::dict out;
          for (const auto& s : res) out[py::float_(s.xi)] = s.a_eff;
          return out;
        },
        py::arg("weight"), py::arg("p"), py::arg("h"), py::arg("n"), py::arg("xi"),
        "Maps each probe xi to a_eff(xi) on the unit interval with n nodes.");

  m.def("run_config",
        [](const std::string& text, const std::string& out_dir, int workers) {
          RunConfig cfg = parse_config_text(text);
          if (!out_dir.empty()) cfg.out_dir = out_dir;
          if (workers > 0) cfg.workers = workers;
          std::ostringstream log;
          RunResult res;
          {
            py::gil_scoped_release release;
            res = execute(cfg, log);
          }
          py::dict out;
          out["exit_code"] = res.exit_code;
          out["files"] = res.files;
          out["error"] = res.error;
          out["log"] = log.str();
          py::list verdicts;
          for (const auto& v : res.verdicts) {
            py::dict d;
            d["name"] = v.name;
            d["passed"] = v.passed;
            d["hard"] = v.hard;
            d["value"] = v.value;
            verdicts.append(d);
          }
          out["verdicts"] = verdicts;
          return out;
        },
        py::arg("text"), py::arg("out_dir") = "", py::arg("workers") = 0,
        "Parses an INI experiment config and runs it; returns exit code, verdicts and files.");
}
