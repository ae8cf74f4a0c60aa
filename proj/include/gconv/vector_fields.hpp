#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gconv/common.hpp"

namespace gconv {

/// A family X = (X_1, ..., X_m) of Lipschitz vector fields on a domain of
/// R^n, represented by its m x n coefficient matrix C(x). The X-gradient of
/// a function u is C(x) Du(x).
///
/// Instances are immutable and cheap to copy; the coefficient closure must be
/// a pure function so that families can be shared between worker threads.
class VectorFieldFamily {
 public:
  using CoeffFn = std::function<Mat(const Point&)>;

  VectorFieldFamily(std::string name, int n, int m, CoeffFn coeff,
                    std::string degenerate_locus = {});

  const std::string& name() const { return name_; }
  int n() const { return n_; }
  int m() const { return m_; }
  const std::string& degenerate_locus() const { return degenerate_locus_; }

  Mat coeff(const Point& x) const;

  /// C(x) * du. Throws ContractViolation on dimension mismatch.
  Vec x_gradient(const Vec& du, const Point& x) const;

 private:
  std::string name_;
  int n_;
  int m_;
  CoeffFn coeff_;
  std::string degenerate_locus_;
};

enum class FamilyKind { euclidean, grushin, heisenberg };

/// euclidean(n): C = I_n. grushin: n = m = 2, rows (1, 0), (0, x).
/// heisenberg: n = 3, m = 2, X1 = (1, 0, -y/2), X2 = (0, 1, x/2).
VectorFieldFamily make_family(FamilyKind kind, int n = 2);

/// Parses "euclidean:<n>", "grushin" or "heisenberg".
VectorFieldFamily make_family(std::string_view spec);

/// Numerical rank of C(x), singular values below 64 eps * max(1, s_max) are
/// treated as zero.
int coefficient_rank(const VectorFieldFamily& family, const Point& x);

struct LicReport {
  double deficient_fraction = 0.0;
  std::vector<Point> witnesses;  // at most 10
  std::size_t n_samples = 0;
};

LicReport lic_report(const VectorFieldFamily& family, const Box& box, int n_samples,
                     std::uint64_t seed = kDefaultSeed);

/// Same diagnostic over caller-supplied points.
LicReport lic_report_at(const VectorFieldFamily& family, std::span<const Point> points);

/// Largest sampled ||C(x) - C(y)||_F / |x - y| over random pairs in the box.
double lipschitz_estimate(const VectorFieldFamily& family, const Box& box, int n_pairs,
                          std::uint64_t seed = kDefaultSeed);

}  // namespace gconv
