#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "gconv/lab.hpp"
#include "gconv/parallel.hpp"

namespace gconv {

namespace {

struct Context {
  std::shared_ptr<const XGradient> xg;
  std::unique_ptr<MonotoneSolver> solver;
  std::unique_ptr<SineDictionary> dictionary;
  DiscreteFunction g;
  double p = 2.0;
  double tol = 1e-8;
};

Context make_context(const SequenceSpec& spec) {
  Context ctx;
  ctx.xg = std::make_shared<const XGradient>(spec.family, spec.grid);
  SolverOptions opts = spec.solver;
  opts.check_structure = false;
  ctx.solver = std::make_unique<MonotoneSolver>(ctx.xg, opts);
  ctx.dictionary = std::make_unique<SineDictionary>(spec.grid, spec.dictionary_modes);
  ctx.g = DiscreteFunction::sample(spec.grid, spec.g, true);
  ctx.p = spec.base.params().p;
  ctx.tol = opts.tolerance_for(ctx.p);
  return ctx;
}

bool same_params(const ClassParams& a, const ClassParams& b) {
  return a.alpha == b.alpha && a.beta == b.beta && a.p == b.p;
}

bool member_structure_ok(const SequenceSpec& spec, const MonotoneMap& a) {
  StructureOptions so;
  so.n_pairs = spec.structure_pairs;
  so.seed = spec.seed;
  so.final_time = spec.kind == ProblemKind::parabolic ? spec.T : 1.0;
  return same_params(a.params(), spec.base.params()) &&
         verify_structure(a, spec.grid.box(), spec.family.m(), so).all_passed();
}

std::optional<double> closed_form_weight(const SequenceSpec& spec) {
  const auto& pl = spec.base.p_laplacian();
  if (spec.family.n() != 1 || spec.family.m() != 1 || !pl || pl->oscillation != 1) return std::nullopt;
  return homogenized_weight_1d(pl->weight, pl->p);
}

std::optional<MonotoneMap> analytic_reference(const SequenceSpec& spec) {
  if (spec.reference.kind == ReferenceSpec::Kind::finest_member) return std::nullopt;
  if (spec.reference.name != "homogenized_1d") {
    throw ConfigError("sweep.reference: unknown analytic reference '" + spec.reference.name + "'");
  }
  const auto w = closed_form_weight(spec);
  if (!w) {
    throw ConfigError(
        "sweep.reference: homogenized_1d needs a 1D euclidean family and a weighted p-Laplacian base");
  }
  return make_p_laplacian(spec.base.params().p, constant_weight(*w), spec.base.time_dependent());
}

MonotoneMap member_map(const SequenceSpec& spec, int h) { return make_oscillating(spec.base, h); }

/// The reference map: analytic when configured, else the finest member.
MonotoneMap reference_map(const SequenceSpec& spec) {
  if (auto a = analytic_reference(spec)) return *a;
  return member_map(spec, spec.h_list.back());
}

/// Error scale of a solve stopped at residual tol: ||X(u - u*)||_p <= (tol / alpha)^{1/(p-1)}.
double solution_floor(const ClassParams& params, double tol) {
  return 10.0 * std::pow(tol / params.alpha, 1.0 / (params.p - 1.0));
}

double flux_floor(const ClassParams& params, double tol, double x_norm) {
  return params.beta * solution_floor(params, tol) * std::pow(1.0 + x_norm, params.p - 2.0);
}

double max_abs(const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

/// ||M||_{p'}^{p'} / (beta^{p'} (|Omega| + ||Xu||_p^p)).
double flux_bound_ratio(const XGradient& xg, const ClassParams& params, const FluxField& M,
                        const DiscreteFunction& u) {
  const double p = params.p;
  const double pc = params.conjugate();
  const double lhs = std::pow(lp_norm(M, pc), pc);
  const double rhs =
      std::pow(params.beta, pc) * (xg.grid().box().volume() + std::pow(v_norm(xg, u, p), p));
  return lhs / rhs;
}

std::vector<Eigen::VectorXd> tests_at_cells(const XGradient& xg, const std::vector<ScalarFn>& tests) {
  std::vector<Eigen::VectorXd> out;
  const auto cells = xg.grid().cell_count();
  for (const auto& phi : tests) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(cells));
    for (std::size_t c = 0; c < cells; ++c) v[static_cast<Eigen::Index>(c)] = phi(xg.cell_center(c));
    out.push_back(std::move(v));
  }
  return out;
}

/// sum_q w_q (M_q, G_q) phi_j(x_c) for every test j.
std::vector<double> weighted_products(const XGradient& xg, const FluxField& M, const FluxField& G,
                                      const std::vector<Eigen::VectorXd>& tests) {
  std::vector<double> out(tests.size(), 0.0);
  const double w = xg.point_weight();
  for (std::size_t qp = 0; qp < xg.point_count(); ++qp) {
    const auto col = static_cast<Eigen::Index>(qp);
    const double dot = M.values().col(col).dot(G.values().col(col));
    const auto c = static_cast<Eigen::Index>(xg.point_cell(qp));
    for (std::size_t j = 0; j < tests.size(); ++j) out[j] += w * dot * tests[j][c];
  }
  return out;
}

void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw EvaluationError("non-finite value recorded for " + what);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Verdict tail_verdict(std::string name, const std::vector<double>& values, double floor,
                     double threshold) {
  Verdict v;
  v.name = std::move(name);
  v.value = values.empty() ? 0.0 : values.back();
  v.threshold = threshold;
  const bool decreasing = decreasing_tail(values, floor);
  const bool below = v.value < threshold;
  v.passed = decreasing && below;
  v.detail = std::string(decreasing ? "decreasing" : "not decreasing") + " over the last three h; final " +
             fmt(v.value) + (below ? " < " : " >= ") + fmt(threshold);
  return v;
}

Verdict all_verdict(std::string name, const std::vector<MemberResult>& members,
                    bool (*pred)(const MemberResult&), const std::string& what) {
  Verdict v;
  v.name = std::move(name);
  v.passed = true;
  std::string bad;
  for (const auto& m : members) {
    if (!pred(m)) {
      v.passed = false;
      bad += " " + std::to_string(m.h);
    }
  }
  v.value = v.passed ? 1.0 : 0.0;
  v.threshold = 1.0;
  v.detail = v.passed ? what + " for every member" : what + " fails for h =" + bad;
  return v;
}

struct EllipticOutcome {
  DiscreteFunction u;
  FluxField M;
  SolveReport report;
  bool structure_ok = true;
};

EllipticOutcome solve_elliptic_member(const Context& ctx, const SequenceSpec& spec,
                                      const MonotoneMap& a, const DiscreteFunction& g,
                                      bool check) {
  EllipticOutcome out;
  if (check) out.structure_ok = member_structure_ok(spec, a);
  auto [u, report] = ctx.solver->solve_elliptic(a, g);
  out.M = momentum(*ctx.xg, a, u, 0.0);
  out.u = std::move(u);
  out.report = std::move(report);
  return out;
}

struct EllipticSweep {
  std::vector<EllipticOutcome> members;
  EllipticOutcome reference;
};

/// Members solve with datum(h); the reference solves with ref_datum.
EllipticSweep sweep_elliptic(const SequenceSpec& spec, const Context& ctx,
                             const std::function<DiscreteFunction(int)>& datum,
                             const DiscreteFunction& ref_datum, bool separate_reference) {
  const auto analytic = analytic_reference(spec);
  const std::size_t n = spec.h_list.size();
  const bool extra = analytic.has_value() || separate_reference;
  EllipticSweep out;
  out.members.resize(n);
  parallel_for(n + (extra ? 1 : 0), spec.workers, [&](std::size_t i) {
    if (i < n) {
      const int h = spec.h_list[i];
      out.members[i] = solve_elliptic_member(ctx, spec, member_map(spec, h), datum(h), true);
    } else {
      out.reference = solve_elliptic_member(ctx, spec, reference_map(spec), ref_datum, false);
    }
  });
  if (!extra) out.reference = out.members.back();
  return out;
}

void add_effective(ConvergenceReport& report, const SequenceSpec& spec) {
  if (spec.probe_xi.empty()) return;
  report.effective = extract_effective_coefficient_1d(spec.family, spec.base, spec.h_list.back(),
                                                      spec.grid, spec.probe_xi, spec.solver);
  report.effective_reference_weight = closed_form_weight(spec);
  if (!report.effective_reference_weight) return;
  const double w = *report.effective_reference_weight;
  const double p = spec.base.params().p;
  Verdict v;
  v.name = "effective_coefficient";
  v.passed = true;
  v.threshold = spec.thresholds.effective;
  for (const auto& s : report.effective) {
    require_finite(s.a_eff, "effective coefficient");
    const double expected = w * std::pow(std::abs(s.xi), p - 2.0) * s.xi;
    const double rel = expected == 0.0 ? std::abs(s.a_eff) : std::abs(s.a_eff - expected) / std::abs(expected);
    v.value = std::max(v.value, rel);
    if (!(rel <= spec.thresholds.effective)) v.passed = false;
  }
  v.detail = "max relative deviation from the homogenized map " + fmt(v.value);
  report.verdicts.push_back(std::move(v));
}

}  // namespace

void SequenceSpec::validate() const {
  if (h_list.size() < 3) throw ConfigError("sweep.h_list: h_list needs >= 3 entries");
  for (std::size_t i = 0; i < h_list.size(); ++i) {
    if (h_list[i] < 1) throw ConfigError("sweep.h_list: entries must be positive integers");
    if (i > 0 && h_list[i] <= h_list[i - 1]) {
      throw ConfigError("sweep.h_list: entries must be strictly increasing");
    }
  }
  if (family.n() != grid.dim()) {
    throw ConfigError("grid.box: grid dimension " + std::to_string(grid.dim()) +
                      " does not match family '" + family.name() + "' (n = " +
                      std::to_string(family.n()) + ")");
  }
  const int need = 8 * h_list.back();
  for (int d = 0; d < grid.dim(); ++d) {
    if (grid.nodes(d) < need) {
      throw ConfigError("grid.n: " + std::to_string(grid.nodes(d)) + " nodes on axis " +
                        std::to_string(d) + " do not resolve h = " + std::to_string(h_list.back()) +
                        " (need >= " + std::to_string(need) + ")");
    }
  }
  if (!base.periodic()) throw ConfigError("operator: the base map must be 1-periodic");
  if (!g) throw ConfigError("data.g: missing datum");
  if (dictionary_modes < 1) throw ConfigError("sweep.dictionary: needs >= 1 mode per axis");
  if (divcurl_bumps < 1) throw ConfigError("sweep.bumps: needs >= 1 bump per axis");
  if (kind == ProblemKind::parabolic || f2 || phi2) {
    if (!(T > 0.0)) throw ConfigError("time.T: must be positive");
    if (K < 1) throw ConfigError("time.K: must be >= 1");
  }
  if (workers < 1) throw ConfigError("experiment.workers: must be >= 1");
}

bool ConvergenceReport::passed() const {
  return std::all_of(verdicts.begin(), verdicts.end(),
                     [](const Verdict& v) { return !v.hard || v.passed; });
}

bool ConsistencyResult::passed() const {
  return std::all_of(verdicts.begin(), verdicts.end(),
                     [](const Verdict& v) { return !v.hard || v.passed; });
}

bool decreasing_tail(const std::vector<double>& values, double floor) {
  const std::size_t n = values.size();
  if (n < 3) return false;
  for (std::size_t i = n - 2; i < n; ++i) {
    if (!(values[i] <= values[i - 1] || values[i] <= floor)) return false;
  }
  return true;
}

std::vector<ScalarFn> bump_test_functions(const Box& box, int per_axis) {
  if (per_axis < 1) throw ContractViolation("bump_test_functions: need >= 1 bump per axis");
  const int n = box.dim();
  std::size_t total = 1;
  for (int d = 0; d < n; ++d) total *= static_cast<std::size_t>(per_axis);
  std::vector<ScalarFn> out;
  for (std::size_t j = 0; j < total; ++j) {
    Point center = Point::Zero(n);
    Point radius = Point::Zero(n);
    std::size_t rest = j;
    for (int d = 0; d < n; ++d) {
      const int k = static_cast<int>(rest % static_cast<std::size_t>(per_axis));
      rest /= static_cast<std::size_t>(per_axis);
      const double step = box.length(d) / (per_axis + 1);
      center[d] = box.lower(d) + (k + 1) * step;
      radius[d] = 0.9 * step;
    }
    out.push_back([center, radius, n](const Point& x) {
      double v = 1.0;
      for (int d = 0; d < n; ++d) {
        const double r = (x[d] - center[d]) / radius[d];
        if (std::abs(r) >= 1.0) return 0.0;
        const double s = 1.0 - r * r;
        v *= s * s * s;
      }
      return v;
    });
  }
  return out;
}

DivCurlResult div_curl_check(const MonotoneSolver& solver, const std::vector<FluxField>& fluxes,
                             const std::vector<DiscreteFunction>& functions,
                             const FluxField& limit_flux, const DiscreteFunction& limit_function,
                             const DiscreteFunction& g, const std::vector<ScalarFn>& tests,
                             const DivCurlOptions& options) {
  const XGradient& xg = solver.x_gradient();
  const Grid& grid = xg.grid();
  if (fluxes.size() != functions.size()) {
    throw ContractViolation("div_curl_check: flux and function sequences differ in length");
  }
  for (std::size_t i = 0; i < fluxes.size(); ++i) {
    if (!(fluxes[i].grid() == grid) || !(functions[i].grid() == grid)) {
      throw ContractViolation("div_curl_check: member " + std::to_string(i) + " lives on another grid");
    }
    const DiscreteFunction r = xg.weak_divergence(fluxes[i]) - g.pinned();
    const double cert = solver.dual_bound(r, options.p);
    if (!(cert <= options.tol)) {
      throw ContractViolation("div_curl_check: divergence certificate fails for member " +
                              std::to_string(i) + " (residual " + fmt(cert) + " > tol " +
                              fmt(options.tol) + ")");
    }
  }
  for (std::size_t j = 0; j < tests.size(); ++j) {
    for (std::size_t i = 0; i < grid.node_count(); ++i) {
      if (grid.is_boundary(i) && tests[j](grid.node_point(i)) != 0.0) {
        throw ContractViolation("div_curl_check: test function " + std::to_string(j) +
                                " does not vanish on the boundary");
      }
    }
  }
  const auto cells = tests_at_cells(xg, tests);
  DivCurlResult out;
  out.limits = weighted_products(xg, limit_flux, xg.apply(limit_function), cells);
  out.passed = true;
  for (std::size_t i = 0; i < fluxes.size(); ++i) {
    out.products.push_back(weighted_products(xg, fluxes[i], xg.apply(functions[i]), cells));
    std::vector<double> gaps(tests.size());
    double rel = 0.0;
    for (std::size_t j = 0; j < tests.size(); ++j) {
      gaps[j] = std::abs(out.products.back()[j] - out.limits[j]);
      const double scale = std::abs(out.limits[j]);
      rel = std::max(rel, scale > 0.0 ? gaps[j] / scale : (gaps[j] > 0.0 ? std::numeric_limits<double>::infinity() : 0.0));
    }
    out.gaps.push_back(std::move(gaps));
    out.relative_gaps.push_back(rel);
  }
  if (fluxes.empty()) out.passed = false;
  for (std::size_t j = 0; j < tests.size() && !fluxes.empty(); ++j) {
    std::vector<double> series;
    for (const auto& row : out.gaps) series.push_back(row[j]);
    const double scale = std::abs(out.limits[j]);
    const double floor = 10.0 * options.tol * std::max(1.0, scale);
    if (!decreasing_tail(series, floor) || !(series.back() < options.threshold * scale)) {
      out.passed = false;
    }
  }
  return out;
}

ConvergenceReport run_elliptic_sequence(const SequenceSpec& spec) {
  spec.validate();
  if (spec.kind != ProblemKind::elliptic) {
    throw ConfigError("sweep.problem: run_elliptic_sequence needs an elliptic sweep");
  }
  const Context ctx = make_context(spec);
  const auto sweep = sweep_elliptic(spec, ctx, [&](int) { return ctx.g; }, ctx.g, false);
  const auto& params = spec.base.params();
  const auto& ref = sweep.reference;

  ConvergenceReport report;
  report.kind = "elliptic";
  report.reference_norm = lp_norm(ref.u, ctx.p);
  const Eigen::MatrixXd ref_pairs = ctx.dictionary->flux_pairings(ref.M);
  report.reference_flux_scale = max_abs(ref_pairs);

  std::vector<double> distances, residuals;
  for (std::size_t i = 0; i < spec.h_list.size(); ++i) {
    const auto& o = sweep.members[i];
    MemberResult m;
    m.h = spec.h_list[i];
    m.distance = lp_norm(o.u - ref.u, ctx.p);
    m.flux_residual = max_abs(ctx.dictionary->flux_pairings(o.M) - ref_pairs);
    m.flux_bound_ratio = flux_bound_ratio(*ctx.xg, params, o.M, o.u);
    m.structure_ok = o.structure_ok;
    m.solve = o.report;
    require_finite(m.distance, "distance");
    require_finite(m.flux_residual, "flux residual");
    require_finite(m.flux_bound_ratio, "flux bound ratio");
    distances.push_back(m.distance);
    residuals.push_back(m.flux_residual);
    report.members.push_back(std::move(m));
  }

  const double u_floor = solution_floor(params, ctx.tol);
  report.verdicts.push_back(tail_verdict("solution_distance", distances, u_floor,
                                         spec.thresholds.distance * report.reference_norm));
  report.verdicts.push_back(tail_verdict("flux_weak", residuals,
                                         flux_floor(params, ctx.tol, ref.report.norm),
                                         spec.thresholds.flux * report.reference_flux_scale));
  report.verdicts.push_back(all_verdict(
      "structure", report.members, [](const MemberResult& m) { return m.structure_ok; },
      "verify_structure with the base constants"));
  report.verdicts.push_back(all_verdict(
      "flux_bound", report.members,
      [](const MemberResult& m) { return m.flux_bound_ratio <= 1.05; }, "flux bound with slack 1.05"));
  report.verdicts.push_back(all_verdict(
      "apriori", report.members, [](const MemberResult& m) { return m.solve.apriori_ok; },
      "a-priori bound"));

  if (spec.divcurl) {
    std::vector<FluxField> fluxes;
    std::vector<DiscreteFunction> functions;
    for (const auto& o : sweep.members) {
      fluxes.push_back(o.M);
      functions.push_back(o.u);
    }
    DivCurlOptions dco;
    dco.p = ctx.p;
    // Recomputing the residual from the stored flux may differ from the
    // solver's own value in the last bits.
    dco.tol = ctx.tol * (1.0 + 1e-6);
    dco.threshold = spec.thresholds.divcurl;
    const auto tests = bump_test_functions(spec.grid.box(), spec.divcurl_bumps);
    const auto dc = div_curl_check(*ctx.solver, fluxes, functions, ref.M, ref.u, ctx.g, tests, dco);
    report.divcurl_limits = dc.limits;
    for (std::size_t i = 0; i < report.members.size(); ++i) {
      report.members[i].divcurl_gap = dc.relative_gaps[i];
      report.members[i].divcurl_products = dc.products[i];
    }
    Verdict v;
    v.name = "divcurl";
    v.passed = dc.passed;
    v.value = dc.relative_gaps.back();
    v.threshold = spec.thresholds.divcurl;
    v.detail = "per test function: gap decreasing over the last three h and final gap < " +
               fmt(spec.thresholds.divcurl) + " |P_inf|; final max relative gap " + fmt(v.value);
    report.verdicts.push_back(std::move(v));
  }
  add_effective(report, spec);
  return report;
}

ConvergenceReport run_parabolic_sequence(const SequenceSpec& spec) {
  spec.validate();
  if (spec.kind != ProblemKind::parabolic) {
    throw ConfigError("sweep.problem: run_parabolic_sequence needs a parabolic sweep");
  }
  const Context ctx = make_context(spec);
  const auto& params = spec.base.params();
  const double tau = spec.T / spec.K;
  const MonotoneMap ref_map = reference_map(spec);
  const bool analytic = spec.reference.kind == ReferenceSpec::Kind::analytic;

  auto sources = [&](const std::optional<SpaceTimeFn>& f) {
    std::vector<DiscreteFunction> out;
    if (!f) {
      out.push_back(ctx.g);
      return out;
    }
    for (int k = 0; k <= spec.K; ++k) {
      const double t = k * tau;
      out.push_back(DiscreteFunction::sample(spec.grid, [&](const Point& x) { return (*f)(x, t); }, true));
    }
    return out;
  };
  const auto f1 = sources(spec.f);
  DiscreteFunction phi1;
  if (spec.phi) {
    phi1 = DiscreteFunction::sample(spec.grid, *spec.phi, true);
  } else {
    phi1 = ctx.solver->solve_elliptic(ref_map, ctx.g).first;
  }
  const bool two = spec.f2.has_value() || spec.phi2.has_value();
  const auto f2 = two ? sources(spec.f2 ? spec.f2 : spec.f) : std::vector<DiscreteFunction>{};
  const DiscreteFunction phi2 =
      two && spec.phi2 ? DiscreteFunction::sample(spec.grid, *spec.phi2, true) : phi1;

  struct Outcome {
    Trajectory traj;
    std::vector<FluxField> M;  // steps 1..K
    Trajectory traj2;
    std::vector<FluxField> N;
    SolveReport report;
    bool structure_ok = true;
    double bound_ratio = 0.0;
  };
  auto run = [&](const MonotoneMap& a, bool check) {
    Outcome o;
    if (check) o.structure_ok = member_structure_ok(spec, a);
    auto [traj, report] = ctx.solver->solve_parabolic(a, f1, phi1, spec.T, spec.K);
    for (int k = 1; k <= spec.K; ++k) {
      o.M.push_back(momentum(*ctx.xg, a, traj.states[static_cast<std::size_t>(k)], traj.times[static_cast<std::size_t>(k)]));
      o.bound_ratio = std::max(o.bound_ratio, flux_bound_ratio(*ctx.xg, params, o.M.back(),
                                                               traj.states[static_cast<std::size_t>(k)]));
    }
    o.traj = std::move(traj);
    o.report = std::move(report);
    if (two) {
      o.traj2 = ctx.solver->solve_parabolic(a, f2, phi2, spec.T, spec.K).first;
      for (int k = 1; k <= spec.K; ++k) {
        o.N.push_back(momentum(*ctx.xg, a, o.traj2.states[static_cast<std::size_t>(k)],
                               o.traj2.times[static_cast<std::size_t>(k)]));
      }
    }
    return o;
  };

  const std::size_t n = spec.h_list.size();
  std::vector<Outcome> members(n);
  Outcome reference;
  parallel_for(n + (analytic ? 1 : 0), spec.workers, [&](std::size_t i) {
    if (i < n) {
      members[i] = run(member_map(spec, spec.h_list[i]), true);
    } else {
      reference = run(ref_map, false);
    }
  });
  if (!analytic) reference = members.back();

  auto space_time_pairs = [&](const std::vector<FluxField>& M) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(spec.family.m(), static_cast<Eigen::Index>(ctx.dictionary->size()));
    for (const auto& Mk : M) acc += tau * ctx.dictionary->flux_pairings(Mk);
    return acc;
  };
  const auto tests = tests_at_cells(*ctx.xg, bump_test_functions(spec.grid.box(), spec.divcurl_bumps));
  auto two_products = [&](const Outcome& o) {
    std::vector<double> acc(tests.size(), 0.0);
    for (int k = 0; k < spec.K; ++k) {
      const auto s = static_cast<std::size_t>(k + 1);
      const FluxField diff = o.M[static_cast<std::size_t>(k)] - o.N[static_cast<std::size_t>(k)];
      const FluxField grad = ctx.xg->apply(o.traj.states[s] - o.traj2.states[s]);
      const auto prod = weighted_products(*ctx.xg, diff, grad, tests);
      for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += tau * prod[j];
    }
    return acc;
  };

  ConvergenceReport report;
  report.kind = "parabolic";
  for (const auto& s : reference.traj.states) report.reference_norm = std::max(report.reference_norm, lp_norm(s, 2.0));
  const Eigen::MatrixXd ref_pairs = space_time_pairs(reference.M);
  report.reference_flux_scale = max_abs(ref_pairs);
  if (two) report.divcurl_limits = two_products(reference);

  std::vector<double> distances, residuals, gaps_series;
  std::vector<std::vector<double>> gap_rows;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& o = members[i];
    MemberResult m;
    m.h = spec.h_list[i];
    for (std::size_t k = 0; k < o.traj.states.size(); ++k) {
      m.distance = std::max(m.distance, lp_norm(o.traj.states[k] - reference.traj.states[k], 2.0));
    }
    m.flux_residual = max_abs(space_time_pairs(o.M) - ref_pairs);
    m.flux_bound_ratio = o.bound_ratio;
    m.structure_ok = o.structure_ok;
    m.solve = o.report;
    if (two) {
      m.divcurl_products = two_products(o);
      std::vector<double> row;
      double rel = 0.0;
      for (std::size_t j = 0; j < tests.size(); ++j) {
        row.push_back(std::abs(m.divcurl_products[j] - report.divcurl_limits[j]));
        const double scale = std::abs(report.divcurl_limits[j]);
        rel = std::max(rel, scale > 0.0 ? row[j] / scale : (row[j] > 0.0 ? std::numeric_limits<double>::infinity() : 0.0));
      }
      m.divcurl_gap = rel;
      gap_rows.push_back(std::move(row));
    }
    require_finite(m.distance, "distance");
    require_finite(m.flux_residual, "flux residual");
    distances.push_back(m.distance);
    residuals.push_back(m.flux_residual);
    report.members.push_back(std::move(m));
  }

  const double u_floor = solution_floor(params, ctx.tol);
  report.verdicts.push_back(tail_verdict("solution_distance", distances, u_floor,
                                         spec.thresholds.distance * report.reference_norm));
  report.verdicts.push_back(tail_verdict("flux_weak", residuals,
                                         spec.T * flux_floor(params, ctx.tol, reference.report.norm),
                                         spec.thresholds.flux * report.reference_flux_scale));
  report.verdicts.push_back(all_verdict(
      "structure", report.members, [](const MemberResult& m) { return m.structure_ok; },
      "verify_structure with the base constants"));
  report.verdicts.push_back(all_verdict(
      "flux_bound", report.members,
      [](const MemberResult& m) { return m.flux_bound_ratio <= 1.05; }, "flux bound with slack 1.05"));
  report.verdicts.push_back(all_verdict(
      "apriori", report.members, [](const MemberResult& m) { return m.solve.apriori_ok; },
      "energy bound"));
  if (two) {
    Verdict v;
    v.name = "two_sequence_product";
    v.passed = true;
    v.threshold = spec.thresholds.divcurl;
    v.value = *report.members.back().divcurl_gap;
    for (std::size_t j = 0; j < tests.size(); ++j) {
      std::vector<double> series;
      for (const auto& row : gap_rows) series.push_back(row[j]);
      const double scale = std::abs(report.divcurl_limits[j]);
      if (!decreasing_tail(series, 10.0 * ctx.tol * std::max(1.0, scale)) ||
          !(series.back() < spec.thresholds.divcurl * scale)) {
        v.passed = false;
      }
    }
    v.detail = "per test function: gap decreasing over the last three h and final gap < " +
               fmt(spec.thresholds.divcurl) + " |P_inf|";
    report.verdicts.push_back(std::move(v));
  }
  return report;
}

ConsistencyResult consistency_check(const SequenceSpec& spec) {
  spec.validate();
  if (spec.base.time_dependent()) {
    throw ContractViolation("consistency_check: the operator must be time-independent");
  }
  const Context ctx = make_context(spec);
  const std::size_t n = spec.h_list.size();
  const double tau = spec.T / spec.K;
  const std::optional<DiscreteFunction> phi =
      spec.phi ? std::optional(DiscreteFunction::sample(spec.grid, *spec.phi, true)) : std::nullopt;

  struct Outcome {
    Eigen::MatrixXd elliptic;
    Eigen::MatrixXd parabolic;
    double drift = 0.0;
  };
  std::vector<Outcome> out(n);
  parallel_for(n, spec.workers, [&](std::size_t i) {
    const MonotoneMap a = member_map(spec, spec.h_list[i]);
    const auto [u, rep] = ctx.solver->solve_elliptic(a, ctx.g);
    out[i].elliptic = ctx.dictionary->flux_pairings(momentum(*ctx.xg, a, u, 0.0));
    const auto traj = ctx.solver->solve_parabolic(a, {ctx.g}, phi ? *phi : u, spec.T, spec.K).first;
    out[i].parabolic = Eigen::MatrixXd::Zero(out[i].elliptic.rows(), out[i].elliptic.cols());
    for (std::size_t k = 1; k < traj.states.size(); ++k) {
      out[i].parabolic += (tau / spec.T) * ctx.dictionary->flux_pairings(momentum(*ctx.xg, a, traj.states[k], traj.times[k]));
      out[i].drift = std::max(out[i].drift, lp_norm(traj.states[k] - traj.states[k - 1], 2.0));
    }
  });

  ConsistencyResult result;
  result.diagnostic = spec.phi.has_value();
  const auto& fine = out.back();
  result.elliptic_flux.assign(fine.elliptic.data(), fine.elliptic.data() + fine.elliptic.size());
  result.parabolic_flux.assign(fine.parabolic.data(), fine.parabolic.data() + fine.parabolic.size());
  const double scale = max_abs(fine.elliptic);
  const double diff = max_abs(fine.elliptic - fine.parabolic);
  result.gap = scale > 0.0 ? diff / scale : diff;
  for (const auto& o : out) result.max_drift = std::max(result.max_drift, o.drift);
  require_finite(result.gap, "consistency gap");
  require_finite(result.max_drift, "trajectory drift");

  Verdict drift;
  drift.name = "trajectory_drift";
  drift.value = result.max_drift;
  drift.threshold = ctx.tol;
  drift.passed = result.max_drift <= ctx.tol;
  drift.hard = !result.diagnostic;
  drift.detail = "max over members and steps of ||u^{k+1} - u^k||_L2 = " + fmt(result.max_drift);
  Verdict gap;
  gap.name = "limit_flux_gap";
  gap.value = result.gap;
  gap.threshold = spec.thresholds.consistency;
  gap.passed = result.gap <= spec.thresholds.consistency;
  gap.hard = !result.diagnostic;
  gap.detail = "finest member, elliptic vs time-averaged parabolic flux tests: " + fmt(result.gap);
  result.verdicts = {drift, gap};
  return result;
}

ConvergenceReport data_convergence_check(const SequenceSpec& spec,
                                         const std::function<ScalarFn(int)>& g_of_h) {
  spec.validate();
  const Context ctx = make_context(spec);
  std::vector<DiscreteFunction> data;
  for (int h : spec.h_list) data.push_back(DiscreteFunction::sample(spec.grid, g_of_h(h), true));
  const auto sweep = sweep_elliptic(
      spec, ctx,
      [&](int h) {
        const auto it = std::find(spec.h_list.begin(), spec.h_list.end(), h);
        return data[static_cast<std::size_t>(it - spec.h_list.begin())];
      },
      ctx.g, true);
  const auto& params = spec.base.params();
  const auto& ref = sweep.reference;

  ConvergenceReport report;
  report.kind = "data-convergence";
  report.reference_norm = lp_norm(ref.u, ctx.p);
  const Eigen::MatrixXd ref_pairs = ctx.dictionary->flux_pairings(ref.M);
  report.reference_flux_scale = max_abs(ref_pairs);
  std::vector<double> distances, residuals;
  for (std::size_t i = 0; i < spec.h_list.size(); ++i) {
    const auto& o = sweep.members[i];
    MemberResult m;
    m.h = spec.h_list[i];
    m.distance = lp_norm(o.u - ref.u, ctx.p);
    m.flux_residual = max_abs(ctx.dictionary->flux_pairings(o.M) - ref_pairs);
    m.flux_bound_ratio = flux_bound_ratio(*ctx.xg, params, o.M, o.u);
    m.structure_ok = o.structure_ok;
    m.solve = o.report;
    require_finite(m.distance, "distance");
    require_finite(m.flux_residual, "flux residual");
    distances.push_back(m.distance);
    residuals.push_back(m.flux_residual);
    report.members.push_back(std::move(m));
  }
  Verdict v;
  v.name = "solution_distance";
  v.value = distances.back();
  v.threshold = solution_floor(params, ctx.tol);
  v.passed = decreasing_tail(distances, v.threshold);
  v.detail = std::string(v.passed ? "decreasing" : "not decreasing") +
             " over the last three h against the fixed-datum reference";
  report.verdicts.push_back(std::move(v));
  Verdict f = tail_verdict("flux_weak", residuals, flux_floor(params, ctx.tol, ref.report.norm),
                           spec.thresholds.flux * report.reference_flux_scale);
  f.hard = false;
  report.verdicts.push_back(std::move(f));
  return report;
}

}  // namespace gconv
