#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gconv/discretization.hpp"
#include "gconv/field_io.hpp"
#include "gconv/operator_class.hpp"
#include "gconv/vector_fields.hpp"

namespace gconv {

struct SolverOptions {
  /// <= 0 selects the default: 1e-8 for p = 2, 1e-6 for p > 2.
  double tol = 0.0;
  int max_iter = 2000;
  /// Initial damping of the preconditioned step.
  double damping = 1.0;
  /// Relative mass regularization of the preconditioner (never of the operator).
  double regularization = 1e-10;
  int max_backtracks = 60;
  double apriori_slack = 1.05;
  /// Run verify_structure on the map before solving.
  bool check_structure = true;
  int structure_pairs = 1000;
  int dual_modes = kDefaultDualModes;

  double tolerance_for(double p) const { return tol > 0.0 ? tol : (p == 2.0 ? 1e-8 : 1e-6); }
};

struct SolveReport {
  int iterations = 0;
  /// dual_norm_estimate of the final residual (max over steps for parabolic runs).
  double residual_dual = 0.0;
  /// Certified upper bound on the V' residual used as the stopping test.
  double residual_bound = 0.0;
  double tol = 0.0;
  bool converged = false;
  /// Elliptic: ||Xu||_p <= slack * alpha^{-1/(p-1)} ||g||_{V'}^{1/(p-1)}.
  /// Parabolic: max_k ||u^k||_{L2} below the discrete energy bound.
  bool apriori_ok = false;
  /// Elliptic: ||Xu||_p. Parabolic: max_k ||u^k||_{L2}.
  double norm = 0.0;
  /// Right-hand side of the a-priori (or energy) inequality, without slack.
  double bound = 0.0;
  double wall_time = 0.0;
  /// Preconditioned residual at each accepted iterate (nonincreasing).
  std::vector<double> descent_history;
  /// Certified residual at each accepted iterate.
  std::vector<double> certified_history;
  int steps = 0;
};

struct EllipticProblem {
  VectorFieldFamily family;
  MonotoneMap a;
  DiscreteFunction g;
  Grid grid;
};

struct ParabolicProblem {
  VectorFieldFamily family;
  MonotoneMap a;
  /// Source at t_k = k T / K, k = 0..K; a single entry means time-independent.
  std::vector<DiscreteFunction> f;
  DiscreteFunction phi;
  Grid grid;
  double T = 1.0;
  int K = 1;

  const DiscreteFunction& source(int k) const { return f.size() == 1 ? f.front() : f.at(static_cast<std::size_t>(k)); }
};

/// Momentum a(x_c, t, Xu) at every quadrature point.
FluxField momentum(const XGradient& xg, const MonotoneMap& a, const DiscreteFunction& u, double t);

/// Density of A(t)u: <A(t)u, v> = sum_q w_q (a(x_c, t, Xu_q), Xv_q).
DiscreteFunction apply_operator(const XGradient& xg, const MonotoneMap& a, const DiscreteFunction& u,
                                double t = 0.0);
DiscreteFunction apply_operator(const VectorFieldFamily& family, const MonotoneMap& a,
                                const DiscreteFunction& u, double t = 0.0);

/// Reusable solver state for one (family, grid): the discrete X-gradient,
/// its Riesz map, and the factorized preconditioners.
class MonotoneSolver {
 public:
  MonotoneSolver(std::shared_ptr<const XGradient> xg, SolverOptions options = {});
  MonotoneSolver(const VectorFieldFamily& family, const Grid& grid, SolverOptions options = {});

  const XGradient& x_gradient() const { return *xg_; }
  std::shared_ptr<const XGradient> x_gradient_ptr() const { return xg_; }
  const SolverOptions& options() const { return options_; }
  const RieszMap& riesz() const { return riesz_; }

  /// Damped preconditioned residual descent for A u = g, starting from
  /// `initial` (zero when absent).
  std::pair<DiscreteFunction, SolveReport> solve_elliptic(
      const MonotoneMap& a, const DiscreteFunction& g,
      const std::optional<DiscreteFunction>& initial = std::nullopt) const;

  /// Implicit Euler: (u^{k+1} - u^k)/tau + A(t_{k+1}) u^{k+1} = f^{k+1}.
  std::pair<Trajectory, SolveReport> solve_parabolic(const MonotoneMap& a,
                                                     const std::vector<DiscreteFunction>& f,
                                                     const DiscreteFunction& phi, double T,
                                                     int K) const;

  /// Certified V' size of a density: exact Riesz value at p = 2, the
  /// |Omega|-scaled Riesz bound otherwise.
  double dual_bound(const DiscreteFunction& g, double p) const;
  double dual_estimate(const DiscreteFunction& g, double p) const;

 private:
  struct Preconditioner;
  struct StepResult {
    Eigen::VectorXd u;
    int iterations = 0;
    double residual_bound = 0.0;
    Eigen::VectorXd residual;
    std::vector<double> descent;
    std::vector<double> certified;
  };

  StepResult descend(const MonotoneMap& a, double t, double shift, const Eigen::VectorXd& anchor,
                     const Eigen::VectorXd& rhs, Eigen::VectorXd u, const Preconditioner& pre,
                     double tol) const;
  void check_structure(const MonotoneMap& a, double final_time) const;
  std::shared_ptr<const Preconditioner> preconditioner(double shift) const;
  const DualNormEstimator& estimator(double p) const;

  std::shared_ptr<const XGradient> xg_;
  SolverOptions options_;
  RieszMap riesz_;
  std::shared_ptr<const Preconditioner> elliptic_pre_;
  mutable std::mutex mutex_;
  mutable std::map<double, std::unique_ptr<DualNormEstimator>> estimators_;
};

std::pair<DiscreteFunction, SolveReport> solve_elliptic(const EllipticProblem& problem,
                                                        const SolverOptions& options = {});
std::pair<Trajectory, SolveReport> solve_parabolic(const ParabolicProblem& problem,
                                                   const SolverOptions& options = {});

}  // namespace gconv
