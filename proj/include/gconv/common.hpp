#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace gconv {

/// Largest ambient dimension and number of fields supported by the small
/// fixed-capacity vectors below.
inline constexpr int kMaxDim = 4;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;
using Point = Vec;

/// Seed used whenever a caller does not supply one.
inline constexpr std::uint64_t kDefaultSeed = 20240531;

using Rng = std::mt19937_64;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: unknown names, invalid parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a precondition (dimension mismatch, wrong grid, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// A map or flux produced a non-finite value.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, int iterations, double best_residual)
      : Error(what), iterations_(iterations), best_residual_(best_residual) {}
  int iterations() const { return iterations_; }
  double best_residual() const { return best_residual_; }

 private:
  int iterations_;
  double best_residual_;
};

class DegenerateSystem : public Error {
 public:
  using Error::Error;
};

/// Axis-aligned box, one (min, max) pair per axis.
struct Box {
  std::vector<std::pair<double, double>> axes;

  Box() = default;
  explicit Box(std::vector<std::pair<double, double>> a);

  int dim() const { return static_cast<int>(axes.size()); }
  double lower(int d) const { return axes[d].first; }
  double upper(int d) const { return axes[d].second; }
  double length(int d) const { return axes[d].second - axes[d].first; }
  double volume() const;
  bool contains(const Point& x, double slack = 0.0) const;

  static Box unit(int n);
  static Box cube(int n, double lo, double hi);

  bool operator==(const Box&) const = default;
};

Point sample_in_box(Rng& rng, const Box& box);
Vec sample_in_ball(Rng& rng, int dim, double radius);

}  // namespace gconv
