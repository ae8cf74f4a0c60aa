#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gconv/discretization.hpp"
#include "gconv/operator_class.hpp"
#include "gconv/solvers.hpp"
#include "gconv/vector_fields.hpp"

namespace gconv {

using ScalarFn = std::function<double(const Point&)>;
using SpaceTimeFn = std::function<double(const Point&, double)>;

enum class ProblemKind { elliptic, parabolic };

struct ReferenceSpec {
  enum class Kind { finest_member, analytic };
  Kind kind = Kind::finest_member;
  /// Analytic reference name; only "homogenized_1d" is known.
  std::string name;
};

struct Thresholds {
  double distance = 0.01;     // relative to ||u_ref||
  double flux = 0.05;         // relative to max_j |<M_ref, psi_j>|
  double divcurl = 0.05;      // relative to |P_inf|
  double consistency = 0.03;  // relative to the elliptic flux scale
  double effective = 0.02;    // relative to the closed-form a_eff
};

/// One h-sweep of oscillating problems A_h u = g (or the parabolic analogue).
struct SequenceSpec {
  SequenceSpec(VectorFieldFamily family_, MonotoneMap base_)
      : family(std::move(family_)), base(std::move(base_)) {}

  VectorFieldFamily family;
  /// 1-periodic base map; member h uses make_oscillating(base, h).
  MonotoneMap base;
  std::vector<int> h_list;
  ProblemKind kind = ProblemKind::elliptic;
  Grid grid;

  ScalarFn g;
  /// Parabolic source; defaults to the time-independent g.
  std::optional<SpaceTimeFn> f;
  /// Parabolic initial datum; defaults to the reference elliptic solution.
  std::optional<ScalarFn> phi;
  /// Second data set for the two-sequence product check (parabolic only).
  std::optional<SpaceTimeFn> f2;
  std::optional<ScalarFn> phi2;
  double T = 0.1;
  int K = 20;

  ReferenceSpec reference;
  int dictionary_modes = 16;
  /// Nonnegative compact bumps per axis used as div-curl test functions.
  int divcurl_bumps = 3;
  bool divcurl = false;
  /// Probes for the 1D effective coefficient at the finest h (empty: skip).
  std::vector<double> probe_xi;
  Thresholds thresholds;
  SolverOptions solver;
  int structure_pairs = 1000;
  int workers = 1;
  std::uint64_t seed = kDefaultSeed;

  /// Throws ConfigError when the sweep invariants fail (>= 3 increasing h
  /// values, N >= 8 max h per axis, periodic base).
  void validate() const;
};

struct Verdict {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
  /// Diagnostic verdicts are reported but do not affect passed().
  bool hard = true;
};

struct EffectiveSample {
  double xi = 0.0;
  double a_eff = 0.0;
  double mean_gradient = 0.0;
  int solves = 0;
};

struct MemberResult {
  int h = 0;
  /// Elliptic: ||u_h - u_ref||_{L^p}. Parabolic: max_k ||u_h^k - u_ref^k||_{L2}.
  double distance = 0.0;
  /// max over dictionary and components of |<M_h - M_ref, psi_j>|.
  double flux_residual = 0.0;
  /// max over test functions of |P_h - P_inf| / |P_inf| (when computed).
  std::optional<double> divcurl_gap;
  std::vector<double> divcurl_products;
  /// ||M_h||_{p'}^{p'} / (beta^{p'} (|Omega| + ||Xu_h||_p^p)).
  double flux_bound_ratio = 0.0;
  bool structure_ok = false;
  SolveReport solve;
};

struct ConvergenceReport {
  std::string kind;
  std::vector<MemberResult> members;
  double reference_norm = 0.0;
  double reference_flux_scale = 0.0;
  std::vector<double> divcurl_limits;
  std::vector<EffectiveSample> effective;
  std::optional<double> effective_reference_weight;
  std::vector<Verdict> verdicts;

  bool passed() const;
};

ConvergenceReport run_elliptic_sequence(const SequenceSpec& spec);
ConvergenceReport run_parabolic_sequence(const SequenceSpec& spec);

/// Nonnegative C^2 bumps prod_d (1 - r_d^2)^3 centred on a per-axis grid of
/// `per_axis` interior points; each vanishes near the boundary.
std::vector<ScalarFn> bump_test_functions(const Box& box, int per_axis);

struct DivCurlResult {
  /// products[h][j] = sum_q w_q (M_h, Xv_h)_q phi_j(x_c).
  std::vector<std::vector<double>> products;
  std::vector<double> limits;
  /// gaps[h][j] = |products[h][j] - limits[j]|.
  std::vector<std::vector<double>> gaps;
  /// Per member: max_j gaps[h][j] / |limits[j]|.
  std::vector<double> relative_gaps;
  bool passed = false;
};

struct DivCurlOptions {
  double p = 2.0;
  double tol = 1e-8;        // divergence certificate
  double threshold = 0.05;  // final gap relative to |P_inf|
};

/// Compensated-compactness products for a sequence (M_h, v_h) with
/// div_X M_h = g certified for every member. Throws ContractViolation when a
/// certificate fails or a test function does not vanish on the boundary.
DivCurlResult div_curl_check(const MonotoneSolver& solver, const std::vector<FluxField>& fluxes,
                             const std::vector<DiscreteFunction>& functions,
                             const FluxField& limit_flux, const DiscreteFunction& limit_function,
                             const DiscreteFunction& g, const std::vector<ScalarFn>& tests,
                             const DivCurlOptions& options = {});

/// Effective map of a 1-periodic 1D operator at oscillation h: for each probe
/// xi, the datum s * A_1 w_xi (w_xi = xi (x - c) phi, phi = 1 on the central
/// half of the domain) is tuned by secant so that the mean of u_h' over the
/// central half equals xi; a_eff(xi) is the mean flux there.
std::vector<EffectiveSample> extract_effective_coefficient_1d(const VectorFieldFamily& family,
                                                              const MonotoneMap& base, int h,
                                                              const Grid& grid,
                                                              const std::vector<double>& xi,
                                                              const SolverOptions& options = {});

/// Closed-form 1D homogenized weight of a weighted p-Laplacian:
/// (int_0^1 w^{-1/(p-1)})^{-(p-1)}; the harmonic mean when p = 2.
double homogenized_weight_1d(const Weight& weight, double p);

struct ConsistencyResult {
  std::vector<double> elliptic_flux;   // <M_h, psi_j> at the finest h
  std::vector<double> parabolic_flux;  // time average of <M_h(t), psi_j>
  double gap = 0.0;                    // relative to max |elliptic_flux|
  double max_drift = 0.0;              // max over members and steps of ||u^{k+1} - u^k||_{L2}
  bool diagnostic = false;
  std::vector<Verdict> verdicts;
  bool passed() const;
};

/// Elliptic and parabolic sweeps of the same time-independent operator; the
/// parabolic member h starts from its own elliptic solution with f = g unless
/// spec.phi is set (diagnostic mode, no hard verdicts).
ConsistencyResult consistency_check(const SequenceSpec& spec);

/// Sweep where member h solves with datum g_of_h(h) while distances are
/// measured against the fixed-datum reference built from spec.g.
ConvergenceReport data_convergence_check(const SequenceSpec& spec,
                                         const std::function<ScalarFn(int)>& g_of_h);

/// "Decreasing over the last three entries": each of the last two entries is
/// <= its predecessor or below `floor`.
bool decreasing_tail(const std::vector<double>& values, double floor);

}  // namespace gconv
