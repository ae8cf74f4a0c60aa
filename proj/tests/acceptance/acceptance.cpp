// Acceptance checks; one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gconv/config.hpp"
#include "gconv/lab.hpp"
#include "gconv/run.hpp"
#include "gconv/solvers.hpp"

using namespace gconv;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome poisson_1d() {
  const auto t0 = std::chrono::steady_clock::now();
  const Grid grid(Box::unit(1), 257);
  const auto family = make_family("euclidean:1");
  const auto g = DiscreteFunction::sample(grid, [](const Point&) { return 1.0; }, true);
  const auto [u, rep] = solve_elliptic({family, make_p_laplacian(2.0, constant_weight(1.0)), g, grid});
  const double peak = u.values().maxCoeff();
  const double t = seconds_since(t0);
  return {rep.converged && std::abs(peak - 0.125) <= 1e-3 && t < 5.0,
          fmt("max u = %.6f (target 0.125 +- 1e-3), %.2f s (< 5 s)", peak, t)};
}

Outcome heat_mode() {
  const auto t0 = std::chrono::steady_clock::now();
  const Grid grid(Box::unit(1), 257);
  const auto family = make_family("euclidean:1");
  auto mode = [](const Point& x) { return std::sin(kPi * x[0]); };
  const auto phi = DiscreteFunction::sample(grid, mode, true);
  const auto f = DiscreteFunction::zeros(grid);
  const double T = 0.1;
  const auto [traj, rep] =
      solve_parabolic({family, make_p_laplacian(2.0, constant_weight(1.0)), {f}, phi, grid, T, 200});
  const auto exact = phi * std::exp(-kPi * kPi * T);
  const double rel = lp_norm(traj.final_state() - exact, 2.0) / lp_norm(exact, 2.0);
  const double t = seconds_since(t0);
  return {rel <= 0.02 && t < 30.0, fmt("relative L2 error %.4g (<= 0.02), %.2f s (< 30 s)", rel, t)};
}

Outcome apriori_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  int held = 0, total = 0;
  double worst = 0.0;
  struct Case {
    const char* family;
    Box box;
    int n;
  };
  const std::vector<Case> cases{{"euclidean:1", Box::unit(1), 257},
                                {"grushin", Box::cube(2, -1.0, 1.0), 33}};
  for (const auto& c : cases) {
    const auto family = make_family(c.family);
    const Grid grid(c.box, c.n);
    SolverOptions opts;
    opts.check_structure = false;
    const MonotoneSolver solver(family, grid, opts);
    const MonotoneMap a = make_oscillating(make_p_laplacian(2.0, sine_weight(2.0, 1.0)), 4);
    std::mt19937_64 rng(kDefaultSeed);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::VectorXd v(static_cast<Eigen::Index>(grid.node_count()));
      for (auto& x : v) x = normal(rng);
      const DiscreteFunction g = DiscreteFunction(grid, v, false).pinned();
      const auto rep = solver.solve_elliptic(a, g).second;
      ++total;
      if (rep.converged && rep.apriori_ok) ++held;
      worst = std::max(worst, rep.norm / rep.bound);
    }
  }
  const double t = seconds_since(t0);
  return {held == total && t < 120.0,
          fmt("%d/%d cases within slack 1.05 (max ||u||_V / bound = %.4f), %.1f s (< 120 s)", held, total,
              worst, t)};
}

Outcome structure_suite() {
  StructureOptions so;
  so.n_pairs = 10000;
  so.tol = 1e-8;
  const Box box = Box::unit(2);
  std::string detail;
  bool ok = true;
  for (double p : {2.0, 3.0, 4.0}) {
    const auto a = make_p_laplacian(p, sine_weight(2.0, 1.0));
    const auto rep = verify_structure(a, box, 2, so);
    const bool pass = rep.passed(Condition::zero) && rep.passed(Condition::monotone) &&
                      rep.passed(Condition::continuity) && rep.passed(Condition::holder);
    ok = ok && pass;
    detail += fmt("p=%g %s; ", p, pass ? "(i)-(iii)' hold" : "FAILS");
  }
  const auto shifted = make_shifted(make_p_laplacian(2.0, constant_weight(1.0)), 0.5);
  const auto rep = verify_structure(shifted, box, 2, so);
  const bool caught = !rep.passed(Condition::zero) && rep[Condition::zero].worst.has_value();
  ok = ok && caught;
  detail += caught ? "shifted map fails (i) with a witness" : "shifted map NOT rejected";
  return {ok, detail};
}

Outcome homogenization() {
  const auto family = make_family("euclidean:1");
  const Grid grid(Box::unit(1), 4096);
  struct Case {
    const char* name;
    Weight w;
    double expected;
  };
  const std::vector<Case> cases{{"2+sin", sine_weight(2.0, 1.0), std::sqrt(3.0)},
                                {"two-phase {1,4}", two_phase_weight(1.0, 4.0), 1.6}};
  bool ok = true;
  std::string detail;
  for (const auto& c : cases) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = extract_effective_coefficient_1d(family, make_p_laplacian(2.0, c.w), 32, grid, {1.0});
    const double t = seconds_since(t0);
    const double rel = std::abs(res.front().a_eff - c.expected) / c.expected;
    ok = ok && rel <= 0.02 && t < 120.0;
    detail += fmt("%s: a_eff = %.5f vs %.5f (rel %.2e <= 0.02), %.1f s; ", c.name, res.front().a_eff,
                  c.expected, rel, t);
  }
  return {ok, detail};
}

SequenceSpec sweep_spec() {
  SequenceSpec spec(make_family("euclidean:1"), make_p_laplacian(2.0, sine_weight(2.0, 1.0)));
  spec.h_list = {4, 8, 16, 32};
  spec.grid = Grid(Box::unit(1), 2049);
  spec.g = [](const Point&) { return 1.0; };
  spec.divcurl = true;
  spec.workers = 4;
  return spec;
}

// Default brute-force reference: the finest member.
const ConvergenceReport& sweep_report() {
  static const ConvergenceReport report = run_elliptic_sequence(sweep_spec());
  return report;
}

// Same sweep against the closed-form homogenized solution.
const ConvergenceReport& analytic_report() {
  static const ConvergenceReport report = [] {
    auto spec = sweep_spec();
    spec.reference = {ReferenceSpec::Kind::analytic, "homogenized_1d"};
    return run_elliptic_sequence(spec);
  }();
  return report;
}

const Verdict* find(const ConvergenceReport& r, const std::string& name) {
  for (const auto& v : r.verdicts) {
    if (v.name == name) return &v;
  }
  return nullptr;
}

Outcome gconv_sweep() {
  const auto& r = sweep_report();
  std::vector<double> d, f;
  for (const auto& m : r.members) {
    d.push_back(m.distance);
    f.push_back(m.flux_residual);
  }
  const bool d_dec = decreasing_tail(d, 0.0);
  const bool f_dec = decreasing_tail(f, 0.0);
  const double rel = d.back() / r.reference_norm;
  std::string series;
  for (const auto& m : r.members) series += fmt("h=%d d=%.3e flux=%.3e; ", m.h, m.distance, m.flux_residual);
  const auto& a = analytic_report();
  std::vector<double> da;
  for (const auto& m : a.members) da.push_back(m.distance);
  return {d_dec && f_dec && rel <= 0.01,
          series + fmt("distances %s, flux residuals %s, final distance %.3f%% of ||u_ref|| (<= 1%%); "
                       "against the homogenized solution: %s, final %.3f%%",
                       d_dec ? "decreasing" : "NOT decreasing", f_dec ? "decreasing" : "NOT decreasing",
                       100.0 * rel, decreasing_tail(da, 0.0) ? "decreasing" : "NOT decreasing",
                       100.0 * da.back() / a.reference_norm)};
}

Outcome divcurl() {
  bool ok = true;
  std::string detail;
  for (const auto* r : {&sweep_report(), &analytic_report()}) {
    const Verdict* v = find(*r, "divcurl");
    ok = ok && v && v->passed;
    detail += r == &sweep_report() ? "finest-member limit: " : "homogenized limit: ";
    for (const auto& m : r->members) detail += fmt("h=%d gap=%.3e; ", m.h, m.divcurl_gap.value_or(NAN));
  }
  return {ok, detail + fmt("%zu bump test functions, every gap decreasing with final gap < 5%% of |P_inf|",
                           sweep_report().divcurl_limits.size())};
}

Outcome consistency() {
  SequenceSpec spec = sweep_spec();
  spec.grid = Grid(Box::unit(1), 513);
  spec.reference = {};
  spec.divcurl = false;
  spec.T = 0.5;
  spec.K = 10;
  const auto res = consistency_check(spec);
  const double tol = SolverOptions{}.tolerance_for(2.0);
  return {res.max_drift <= tol && res.gap <= 0.03,
          fmt("max drift %.3e (<= %.0e), limit-flux gap %.3e (<= 0.03)", res.max_drift, tol, res.gap)};
}

Outcome grushin_symmetry() {
  const auto family = make_family("grushin");
  const Grid grid(Box::cube(2, -1.0, 1.0), 65);
  const auto g = DiscreteFunction::sample(grid, [](const Point& x) { return 1.0 + x[1] * x[1]; }, true);
  std::string detail;
  bool ok = true;
  for (double p : {2.0, 3.0}) {
    const auto [u, rep] = solve_elliptic({family, make_p_laplacian(p, constant_weight(1.0)), g, grid});
    double asym = 0.0;
    const double scale = u.values().cwiseAbs().maxCoeff();
    for (std::size_t i = 0; i < grid.node_count(); ++i) {
      auto idx = grid.node_multi(i);
      idx[0] = grid.nodes(0) - 1 - idx[0];
      asym = std::max(asym, std::abs(u[i] - u[grid.node_index(idx)]));
    }
    const double rel = asym / scale;
    ok = ok && rep.converged && rep.residual_bound <= rep.tol && rel <= 1e-6;
    detail += fmt("p=%g: residual %.2e (tol %.0e), %d iterations, reflection asymmetry %.2e (<= 1e-6); ", p,
                  rep.residual_bound, rep.tol, rep.iterations, rel);
  }
  return {ok, detail};
}

Outcome reproducibility() {
  const std::string text =
      "[experiment]\nkind = sweep\nseed = 12345\nworkers = 4\n"
      "[family]\nname = euclidean:1\n[grid]\nn = 257\n"
      "[operator]\nkind = two_phase\nw1 = 1\nw2 = 4\n"
      "[sweep]\nh_list = 4,8,16,32\n";
  const fs::path root = fs::temp_directory_path() / "gconv_acceptance_repro";
  fs::remove_all(root);
  std::vector<std::string> csv;
  for (const char* run : {"a", "b"}) {
    RunConfig cfg = parse_config_text(text);
    cfg.out_dir = root / run;
    std::ostringstream log;
    const auto res = execute(cfg, log);
    if (res.exit_code == kExitError) return {false, "run failed: " + res.error};
    std::ifstream in(cfg.out_dir / "report.csv", std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    csv.push_back(buf.str());
  }
  const bool same = !csv[0].empty() && csv[0] == csv[1];
  const bool json_same = sha256_file(root / "a/report.json") == sha256_file(root / "b/report.json");
  fs::remove_all(root);
  return {same && json_same, fmt("report.csv %s, report.json %s across two runs",
                                 same ? "byte-identical" : "DIFFERS", json_same ? "byte-identical" : "DIFFERS")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"1D Poisson regression", poisson_1d},
      {"heat-mode decay", heat_mode},
      {"a-priori bound suite", apriori_suite},
      {"structural verification", structure_suite},
      {"homogenization oracle", homogenization},
      {"G-convergence sweep", gconv_sweep},
      {"div-curl products", divcurl},
      {"elliptic-parabolic consistency", consistency},
      {"degenerate-field robustness", grushin_symmetry},
      {"reproducibility", reproducibility},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.passed) ++failed;
    std::printf("criterion %zu %s: %s: %s\n", i + 1, o.passed ? "PASS" : "FAIL", criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed;
}
