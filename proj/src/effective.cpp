#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <tuple>
#include <string>

#include "gconv/lab.hpp"

namespace gconv {

namespace {

double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm,
               double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b) {
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  return simpson(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), 1e-13, 40);
}

/// C^2 cutoff: 0 at the boundary, 1 on the central half.
double cutoff(double x, double lo, double hi) {
  const double q = 0.25 * (hi - lo);
  auto ramp = [](double s) { return s * s * s * (10.0 - 15.0 * s + 6.0 * s * s); };
  if (x <= lo || x >= hi) return 0.0;
  if (x < lo + q) return ramp((x - lo) / q);
  if (x > hi - q) return ramp((hi - x) / q);
  return 1.0;
}

}  // namespace

double homogenized_weight_1d(const Weight& weight, double p) {
  if (!(p >= 2.0)) throw ContractViolation("homogenized_weight_1d: need p >= 2");
  const double e = -1.0 / (p - 1.0);
  auto f = [&](double y) {
    Point x = Point::Zero(1);
    x[0] = y;
    return std::pow(weight(x), e);
  };
  // Split at 1/2 so two-phase jumps fall on a panel boundary.
  const double mean = integrate(f, 0.0, 0.5) + integrate(f, 0.5, 1.0);
  return std::pow(mean, -(p - 1.0));
}

std::vector<EffectiveSample> extract_effective_coefficient_1d(const VectorFieldFamily& family,
                                                              const MonotoneMap& base, int h,
                                                              const Grid& grid,
                                                              const std::vector<double>& xi,
                                                              const SolverOptions& options) {
  if (family.n() != 1 || family.m() != 1 || grid.dim() != 1) {
    throw ContractViolation("extract_effective_coefficient_1d: needs a 1D euclidean family, got '" +
                            family.name() + "'");
  }
  const Point probe = Point::Zero(1);
  if (family.coeff(probe)(0, 0) != 1.0) {
    throw ContractViolation("extract_effective_coefficient_1d: needs a 1D euclidean family");
  }
  if (!base.periodic()) throw ContractViolation("extract_effective_coefficient_1d: base must be 1-periodic");
  if (h < 1) throw ContractViolation("extract_effective_coefficient_1d: need h >= 1");
  if (grid.nodes(0) < 8 * h) {
    throw ContractViolation("extract_effective_coefficient_1d: " + std::to_string(grid.nodes(0)) +
                            " nodes do not resolve h = " + std::to_string(h));
  }

  const MonotoneMap a = make_oscillating(base, h);
  auto xg = std::make_shared<const XGradient>(family, grid);
  MonotoneSolver solver(xg, options);
  const double lo = grid.box().lower(0);
  const double hi = grid.box().upper(0);
  const double mid = 0.5 * (lo + hi);
  const double in_lo = lo + 0.25 * (hi - lo);
  const double in_hi = hi - 0.25 * (hi - lo);
  const double eps = 1e-9 * grid.spacing(0);

  // Unit probe: A_1 w with w = (x - c) phi(x).
  const auto w1 = DiscreteFunction::sample(
      grid, [&](const Point& x) { return (x[0] - mid) * cutoff(x[0], lo, hi); }, true);
  const DiscreteFunction probe_datum = xg->weak_divergence(xg->apply(w1));

  std::vector<std::size_t> interior_cells;
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    const double left = grid.node_point(grid.cell_corner_node(c, 0))[0];
    const double right = grid.node_point(grid.cell_corner_node(c, 1))[0];
    if (left >= in_lo - eps && right <= in_hi + eps) interior_cells.push_back(c);
  }
  const double count = static_cast<double>(interior_cells.size());

  auto measure = [&](double s, std::optional<DiscreteFunction>& warm) {
    auto [u, rep] = solver.solve_elliptic(a, probe_datum * s, warm);
    const FluxField grad = xg->apply(u);
    const FluxField flux = momentum(*xg, a, u, 0.0);
    double g_mean = 0.0, f_mean = 0.0;
    for (auto c : interior_cells) {
      g_mean += grad.cell_mean(c)[0];
      f_mean += flux.cell_mean(c)[0];
    }
    warm = std::move(u);
    return std::pair{g_mean / count, f_mean / count};
  };

  std::vector<EffectiveSample> out;
  for (double target : xi) {
    EffectiveSample sample;
    sample.xi = target;
    if (target == 0.0) {
      out.push_back(sample);
      continue;
    }
    std::optional<DiscreteFunction> warm;
    double s0 = target;
    auto [g0, f0] = measure(s0, warm);
    sample.solves = 1;
    if (g0 == 0.0) throw DegenerateSystem("extract_effective_coefficient_1d: probe has zero mean gradient");
    double s1 = s0 * target / g0;
    auto [g1, f1] = measure(s1, warm);
    sample.solves = 2;
    const double tol = std::max(1e-10, solver.options().tolerance_for(a.params().p)) * std::abs(target);
    while (std::abs(g1 - target) > tol && sample.solves < 40) {
      if (g1 == g0) break;
      const double s2 = s1 + (target - g1) * (s1 - s0) / (g1 - g0);
      s0 = s1;
      g0 = g1;
      s1 = s2;
      std::tie(g1, f1) = measure(s1, warm);
      ++sample.solves;
    }
    sample.mean_gradient = g1;
    sample.a_eff = f1;
    out.push_back(sample);
  }
  return out;
}

}  // namespace gconv
