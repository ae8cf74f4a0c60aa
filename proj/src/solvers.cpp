#include "gconv/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/SparseCholesky>

namespace gconv {

namespace {

// Evaluates a(x_c, t, Xu_q) at every quadrature point; flattened as (qp * m + k).
Eigen::VectorXd flux_flat(const XGradient& xg, const MonotoneMap& a, const Eigen::VectorXd& nodal,
                          double t) {
  const Eigen::VectorXd grad = xg.apply_nodal(nodal);
  const int m = xg.m();
  Eigen::VectorXd out(grad.size());
  Vec xi(m);
  for (std::size_t qp = 0; qp < xg.point_count(); ++qp) {
    const auto base = static_cast<Eigen::Index>(qp * m);
    for (int k = 0; k < m; ++k) xi[k] = grad[base + k];
    const auto cell = xg.point_cell(qp);
    const Vec v = a(xg.cell_center(cell), t, xi);
    if (v.size() != m || !v.allFinite()) {
      std::ostringstream os;
      os << "non-finite or mis-sized flux at cell " << cell << " (center "
         << xg.cell_center(cell).transpose() << "), xi = " << xi.transpose();
      throw EvaluationError(os.str());
    }
    for (int k = 0; k < m; ++k) out[base + k] = v[k];
  }
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

FluxField momentum(const XGradient& xg, const MonotoneMap& a, const DiscreteFunction& u, double t) {
  if (!(u.grid() == xg.grid())) throw ContractViolation("momentum: function lives on another grid");
  Eigen::VectorXd flat = flux_flat(xg, a, u.values(), t);
  Eigen::MatrixXd values =
      Eigen::Map<Eigen::MatrixXd>(flat.data(), xg.m(), static_cast<Eigen::Index>(xg.point_count()));
  return FluxField(xg.grid(), xg.m(), std::move(values));
}

DiscreteFunction apply_operator(const XGradient& xg, const MonotoneMap& a, const DiscreteFunction& u,
                                double t) {
  if (!u.zero_boundary()) throw ContractViolation("apply_operator: u must have zero boundary values");
  if (!(u.grid() == xg.grid())) throw ContractViolation("apply_operator: function lives on another grid");
  const Eigen::VectorXd div = xg.weak_divergence_interior(flux_flat(xg, a, u.values(), t));
  return DiscreteFunction(xg.grid(), xg.extend_from_interior(div), true);
}

DiscreteFunction apply_operator(const VectorFieldFamily& family, const MonotoneMap& a,
                                const DiscreteFunction& u, double t) {
  return apply_operator(XGradient(family, u.grid()), a, u, t);
}

struct MonotoneSolver::Preconditioner {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
};

MonotoneSolver::MonotoneSolver(std::shared_ptr<const XGradient> xg, SolverOptions options)
    : xg_(std::move(xg)), options_(options), riesz_(xg_) {
  elliptic_pre_ = preconditioner(0.0);
}

MonotoneSolver::MonotoneSolver(const VectorFieldFamily& family, const Grid& grid,
                               SolverOptions options)
    : MonotoneSolver(std::make_shared<const XGradient>(family, grid), options) {}

std::shared_ptr<const MonotoneSolver::Preconditioner> MonotoneSolver::preconditioner(
    double shift) const {
  Eigen::SparseMatrix<double> r = xg_->stiffness();
  double norm_inf = 0.0;
  for (Eigen::Index j = 0; j < r.outerSize(); ++j) {
    double s = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(r, j); it; ++it) s += std::abs(it.value());
    norm_inf = std::max(norm_inf, s);  // symmetric: column sums equal row sums
  }
  const double vol = xg_->grid().nodal_volume();
  const double diag = options_.regularization * norm_inf * vol + shift * vol;
  Eigen::SparseMatrix<double> id(r.rows(), r.cols());
  id.setIdentity();
  r += diag * id;
  auto pre = std::make_shared<Preconditioner>();
  pre->ldlt.compute(r);
  if (pre->ldlt.info() != Eigen::Success || (pre->ldlt.vectorD().array() <= 0.0).any()) {
    throw DegenerateSystem("preconditioner is singular after regularization");
  }
  return pre;
}

const DualNormEstimator& MonotoneSolver::estimator(double p) const {
  std::lock_guard lock(mutex_);
  auto& slot = estimators_[p];
  if (!slot) slot = std::make_unique<DualNormEstimator>(xg_, p, options_.dual_modes);
  return *slot;
}

double MonotoneSolver::dual_bound(const DiscreteFunction& g, double p) const {
  const double riesz = riesz_.norm(g);
  return p == 2.0 ? riesz : riesz * std::pow(xg_->grid().box().volume(), (p - 2.0) / (2.0 * p));
}

double MonotoneSolver::dual_estimate(const DiscreteFunction& g, double p) const {
  return p == 2.0 ? riesz_.norm(g) : estimator(p).estimate(g);
}

void MonotoneSolver::check_structure(const MonotoneMap& a, double final_time) const {
  if (!options_.check_structure) return;
  StructureOptions so;
  so.n_pairs = options_.structure_pairs;
  so.final_time = final_time;
  const auto report = verify_structure(a, xg_->grid().box(), xg_->m(), so);
  if (!report.all_passed()) {
    std::string failed;
    for (int c = 0; c < 4; ++c) {
      if (!report.conditions[c].passed) failed += std::string(" ") + condition_name(Condition(c));
    }
    throw ContractViolation("monotone map '" + a.description() +
                            "' fails structural conditions:" + failed);
  }
}

MonotoneSolver::StepResult MonotoneSolver::descend(const MonotoneMap& a, double t, double shift,
                                                   const Eigen::VectorXd& anchor,
                                                   const Eigen::VectorXd& rhs, Eigen::VectorXd u,
                                                   const Preconditioner& pre, double tol) const {
  const double vol = xg_->grid().nodal_volume();
  const double p = a.params().p;
  const double bound_factor =
      p == 2.0 ? 1.0 : std::pow(xg_->grid().box().volume(), (p - 2.0) / (2.0 * p));

  auto residual = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd r =
        xg_->weak_divergence_interior(flux_flat(*xg_, a, xg_->extend_from_interior(v), t)) - rhs;
    if (shift != 0.0) r += shift * (v - anchor);
    return r;
  };

  StepResult out;
  Eigen::VectorXd r = residual(u);
  Eigen::VectorXd d = pre.ldlt.solve(r * vol);
  double rho = std::sqrt(std::max(0.0, vol * r.dot(d)));
  double cert = bound_factor * riesz_.norm_interior(r);
  out.descent.push_back(rho);
  out.certified.push_back(cert);

  // Step length: the probe at the current damping gives J d ~ (r - r_probe) / tau, and the
  // minimizer of the linearized preconditioned residual along -d is tried next.
  double damping = options_.damping;
  while (cert > tol) {
    if (out.iterations >= options_.max_iter) {
      throw NonConvergence("monotone solver: max_iter = " + std::to_string(options_.max_iter) +
                               " reached, best certified residual " + std::to_string(cert),
                           out.iterations, cert);
    }
    bool accepted = false;
    for (int b = 0; b <= options_.max_backtracks && !accepted; ++b) {
      Eigen::VectorXd probe = u - damping * d;
      Eigen::VectorXd r_probe = residual(probe);
      Eigen::VectorXd d_probe = pre.ldlt.solve(r_probe * vol);
      const double rho_probe = std::sqrt(std::max(0.0, vol * r_probe.dot(d_probe)));

      const Eigen::VectorXd jd = (r - r_probe) / damping;
      const Eigen::VectorXd pjd = (d - d_probe) / damping;
      const double num = vol * r.dot(pjd);
      const double den = vol * jd.dot(pjd);
      const double tau = den > 0.0 && num > 0.0 ? num / den : 0.0;
      if (tau > 0.0 && std::isfinite(tau) && std::abs(tau - damping) > 1e-3 * damping) {
        Eigen::VectorXd trial = u - tau * d;
        Eigen::VectorXd r_trial = residual(trial);
        Eigen::VectorXd d_trial = pre.ldlt.solve(r_trial * vol);
        const double rho_trial = std::sqrt(std::max(0.0, vol * r_trial.dot(d_trial)));
        if (rho_trial < rho && rho_trial <= rho_probe) {
          u = std::move(trial);
          r = std::move(r_trial);
          d = std::move(d_trial);
          rho = rho_trial;
          damping = tau;
          accepted = true;
          break;
        }
      }
      if (rho_probe < rho) {
        u = std::move(probe);
        r = std::move(r_probe);
        d = std::move(d_probe);
        rho = rho_probe;
        accepted = true;
        break;
      }
      damping *= 0.5;
    }
    if (!accepted) {
      throw NonConvergence("monotone solver: no descent after " +
                               std::to_string(options_.max_backtracks) +
                               " halvings, certified residual " + std::to_string(cert),
                           out.iterations, cert);
    }
    ++out.iterations;
    cert = bound_factor * riesz_.norm_interior(r);
    out.descent.push_back(rho);
    out.certified.push_back(cert);
  }
  out.u = std::move(u);
  out.residual = std::move(r);
  out.residual_bound = cert;
  return out;
}

std::pair<DiscreteFunction, SolveReport> MonotoneSolver::solve_elliptic(
    const MonotoneMap& a, const DiscreteFunction& g,
    const std::optional<DiscreteFunction>& initial) const {
  const auto start = std::chrono::steady_clock::now();
  const auto& grid = xg_->grid();
  if (!(g.grid() == grid)) throw ContractViolation("solve_elliptic: datum lives on another grid");
  if (!g.values().allFinite()) throw ContractViolation("solve_elliptic: datum is not finite");
  if (a.time_dependent()) {
    throw ContractViolation("solve_elliptic: elliptic problems need a time-independent map");
  }
  check_structure(a, 1.0);
  const double p = a.params().p;
  const double tol = options_.tolerance_for(p);

  Eigen::VectorXd u0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(xg_->interior_count()));
  if (initial) {
    if (!(initial->grid() == grid) || !initial->zero_boundary()) {
      throw ContractViolation("solve_elliptic: initial iterate must be a zero-boundary function on the grid");
    }
    u0 = xg_->restrict_to_interior(initial->values());
  }
  const Eigen::VectorXd rhs = xg_->restrict_to_interior(g.values());
  auto step = descend(a, 0.0, 0.0, Eigen::VectorXd(), rhs, std::move(u0), *elliptic_pre_, tol);

  DiscreteFunction u(grid, xg_->extend_from_interior(step.u), true);
  SolveReport report;
  report.iterations = step.iterations;
  report.residual_bound = step.residual_bound;
  report.residual_dual =
      dual_estimate(DiscreteFunction(grid, xg_->extend_from_interior(step.residual), true), p);
  report.tol = tol;
  report.converged = true;
  report.norm = v_norm(*xg_, u, p);
  const double g_dual = dual_bound(g, p);
  report.bound = std::pow(a.params().alpha, -1.0 / (p - 1.0)) * std::pow(g_dual, 1.0 / (p - 1.0));
  report.apriori_ok = report.norm <= options_.apriori_slack * report.bound + 1e-14;
  report.descent_history = std::move(step.descent);
  report.certified_history = std::move(step.certified);
  report.steps = 1;
  report.wall_time = seconds_since(start);
  return {std::move(u), std::move(report)};
}

std::pair<Trajectory, SolveReport> MonotoneSolver::solve_parabolic(
    const MonotoneMap& a, const std::vector<DiscreteFunction>& f, const DiscreteFunction& phi,
    double T, int K) const {
  const auto start = std::chrono::steady_clock::now();
  const auto& grid = xg_->grid();
  if (K < 1) throw ContractViolation("solve_parabolic: need K >= 1");
  if (!(T > 0.0)) throw ContractViolation("solve_parabolic: need T > 0");
  if (!phi.zero_boundary() || !(phi.grid() == grid)) {
    throw ContractViolation("solve_parabolic: phi must be a zero-boundary function on the grid");
  }
  if (f.size() != 1 && f.size() != static_cast<std::size_t>(K) + 1) {
    throw ContractViolation("solve_parabolic: f needs 1 or K + 1 time samples");
  }
  for (const auto& fk : f) {
    if (!(fk.grid() == grid)) throw ContractViolation("solve_parabolic: source lives on another grid");
  }
  check_structure(a, T);
  const double p = a.params().p;
  const double tol = options_.tolerance_for(p);
  const double tau = T / K;
  const auto pre = preconditioner(1.0 / tau);
  auto source = [&](int k) -> const DiscreteFunction& {
    return f.size() == 1 ? f.front() : f[static_cast<std::size_t>(k)];
  };

  Trajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(phi);
  SolveReport report;
  report.tol = tol;
  Eigen::VectorXd u = xg_->restrict_to_interior(phi.values());

  // Discrete energy estimate: |u^{k+1}|^2 <= |u^k|^2 + 2 tau c_p ||f^{k+1}||_{V'}^{p'}.
  const double alpha = a.params().alpha;
  const double pc = p / (p - 1.0);
  const double c_p = 1.0 / (pc * std::pow(p * alpha, pc / p));
  const double vol = grid.nodal_volume();
  double energy_budget = vol * u.squaredNorm();
  double max_l2 = std::sqrt(energy_budget);

  for (int k = 0; k < K; ++k) {
    const double t = (k + 1) * tau;
    const Eigen::VectorXd rhs = xg_->restrict_to_interior(source(k + 1).values());
    StepResult step;
    try {
      step = descend(a, t, 1.0 / tau, u, rhs, u, *pre, tol);
    } catch (const NonConvergence& e) {
      throw NonConvergence("time step " + std::to_string(k + 1) + ": " + e.what(), e.iterations(),
                           e.best_residual());
    }
    u = std::move(step.u);
    report.iterations += step.iterations;
    report.residual_bound = std::max(report.residual_bound, step.residual_bound);
    report.residual_dual = std::max(
        report.residual_dual,
        dual_estimate(DiscreteFunction(grid, xg_->extend_from_interior(step.residual), true), p));
    report.descent_history.insert(report.descent_history.end(), step.descent.begin(), step.descent.end());
    report.certified_history.insert(report.certified_history.end(), step.certified.begin(),
                                    step.certified.end());
    energy_budget += 2.0 * tau * c_p * std::pow(dual_bound(source(k + 1), p), pc);
    traj.times.push_back(t);
    traj.states.emplace_back(grid, xg_->extend_from_interior(u), true);
    max_l2 = std::max(max_l2, std::sqrt(vol * u.squaredNorm()));
  }
  report.converged = true;
  report.steps = K;
  report.norm = max_l2;
  report.bound = std::sqrt(energy_budget);
  // The step residuals perturb the energy identity by at most tau * tol * ||Xu||.
  report.apriori_ok = report.norm <= options_.apriori_slack * report.bound + 10.0 * tol;
  report.wall_time = seconds_since(start);
  return {std::move(traj), std::move(report)};
}

std::pair<DiscreteFunction, SolveReport> solve_elliptic(const EllipticProblem& problem,
                                                        const SolverOptions& options) {
  MonotoneSolver solver(problem.family, problem.grid, options);
  return solver.solve_elliptic(problem.a, problem.g);
}

std::pair<Trajectory, SolveReport> solve_parabolic(const ParabolicProblem& problem,
                                                   const SolverOptions& options) {
  MonotoneSolver solver(problem.family, problem.grid, options);
  return solver.solve_parabolic(problem.a, problem.f, problem.phi, problem.T, problem.K);
}

}  // namespace gconv
