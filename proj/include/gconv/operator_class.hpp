#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gconv/common.hpp"

namespace gconv {

/// Structural constants of the class M(alpha, beta, p): coercivity alpha,
/// continuity beta, growth exponent p >= 2.
struct ClassParams {
  double alpha = 1.0;
  double beta = 1.0;
  double p = 2.0;

  ClassParams() = default;
  ClassParams(double alpha_, double beta_, double p_);

  /// Constant of the weaker continuity condition (iii)' implied by (i)-(iii):
  ///   (beta^p / alpha)^(1/(p-1)) * max{1, alpha^(-(p-2)/(p-1))}.
  double beta_prime() const;

  /// Conjugate exponent p' = p / (p - 1).
  double conjugate() const { return p / (p - 1.0); }
};

double beta_prime(const ClassParams& params);

/// Scalar spatial coefficient w(x) with known bounds. Periodic weights are
/// 1-periodic in every coordinate.
struct Weight {
  std::function<double(const Point&)> fn;
  double min = 1.0;
  double max = 1.0;
  bool periodic = true;
  std::string description;

  double operator()(const Point& x) const { return fn(x); }
};

Weight constant_weight(double c);
/// w(y) = mean + amplitude * sin(2 pi y_1).
Weight sine_weight(double mean, double amplitude);
/// w(y) = w1 on [0, 1/2), w2 on [1/2, 1) in y_1, extended periodically.
Weight two_phase_weight(double w1, double w2);
/// Piecewise constant along y_1: w(y) = values[floor(k * frac(y_1))].
Weight table_weight(std::vector<double> values);

/// A Caratheodory map a(x, t, xi) together with its declared class constants.
/// Evaluation is a pure function and may be called from several threads.
class MonotoneMap {
 public:
  using EvalFn = std::function<Vec(const Point& x, double t, const Vec& xi)>;

  /// Extra structure carried by weighted p-Laplacian instances; the lab uses
  /// it to build closed-form homogenized references.
  struct PLaplacian {
    double p = 2.0;
    Weight weight;
    int oscillation = 1;
  };

  MonotoneMap(ClassParams params, bool time_dependent, EvalFn eval, bool periodic,
              std::string description);

  Vec operator()(const Point& x, double t, const Vec& xi) const { return eval_(x, t, xi); }

  const ClassParams& params() const { return params_; }
  bool time_dependent() const { return time_dependent_; }
  bool periodic() const { return periodic_; }
  const std::string& description() const { return description_; }
  const std::optional<PLaplacian>& p_laplacian() const { return p_laplacian_; }

  MonotoneMap with_p_laplacian(PLaplacian info) const;

 private:
  ClassParams params_;
  bool time_dependent_;
  EvalFn eval_;
  bool periodic_;
  std::string description_;
  std::optional<PLaplacian> p_laplacian_;
};

/// a(x, t, xi) = w(x) |xi|^(p-2) xi with alpha = w_min 2^(2-p), beta = (p-1) w_max.
MonotoneMap make_p_laplacian(double p, const Weight& weight, bool time_dependent = false);

/// a_h(x, t, xi) = base(frac(h x), t, xi). Class constants are unchanged.
MonotoneMap make_oscillating(const MonotoneMap& base, int h);

/// base(x, t, xi) + shift. Violates a(x, t, 0) = 0 whenever shift != 0; used to
/// exercise the structure checker.
MonotoneMap make_shifted(const MonotoneMap& base, double shift);

enum class Condition { zero = 0, monotone = 1, continuity = 2, holder = 3 };

const char* condition_name(Condition c);

struct Witness {
  Point x;
  double t = 0.0;
  Vec xi;
  Vec eta;
  double margin = 0.0;
};

struct ConditionResult {
  bool passed = true;
  std::optional<Witness> worst;
};

struct StructureReport {
  std::array<ConditionResult, 4> conditions;
  double empirical_alpha = 0.0;
  double empirical_beta = 0.0;

  const ConditionResult& operator[](Condition c) const {
    return conditions[static_cast<int>(c)];
  }
  bool passed(Condition c) const { return (*this)[c].passed; }
  bool all_passed() const;
};

struct StructureOptions {
  int n_pairs = 10000;
  /// Relative tolerance: a margin passes when margin >= -tol * max(1, |rhs|).
  double tol = 1e-8;
  double radius = 10.0;
  double final_time = 1.0;
  std::uint64_t seed = kDefaultSeed;
};

/// Seeded Monte-Carlo certificate of conditions (i), (ii), (iii) and (iii)'
/// for xi, eta drawn from the ball of the given radius in R^m and (x, t)
/// drawn from box x [0, final_time].
StructureReport verify_structure(const MonotoneMap& a, const Box& box, int m,
                                 const StructureOptions& options = {});

}  // namespace gconv
