#include "gconv/vector_fields.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include <Eigen/SVD>

namespace gconv {

VectorFieldFamily::VectorFieldFamily(std::string name, int n, int m, CoeffFn coeff,
                                     std::string degenerate_locus)
    : name_(std::move(name)),
      n_(n),
      m_(m),
      coeff_(std::move(coeff)),
      degenerate_locus_(std::move(degenerate_locus)) {
  if (n_ < 1 || n_ > kMaxDim) {
    throw ConfigError("vector field family '" + name_ + "': ambient dimension " +
                      std::to_string(n_) + " outside [1, " + std::to_string(kMaxDim) + "]");
  }
  if (m_ < 1 || m_ > n_) {
    throw ConfigError("vector field family '" + name_ + "': need 1 <= m <= n");
  }
  if (!coeff_) throw ConfigError("vector field family '" + name_ + "': empty coefficient map");
}

Mat VectorFieldFamily::coeff(const Point& x) const {
  if (x.size() != n_) {
    throw ContractViolation("coeff: point has dimension " + std::to_string(x.size()) +
                            ", family '" + name_ + "' expects " + std::to_string(n_));
  }
  return coeff_(x);
}

Vec VectorFieldFamily::x_gradient(const Vec& du, const Point& x) const {
  if (du.size() != n_) {
    throw ContractViolation("x_gradient: gradient has dimension " + std::to_string(du.size()) +
                            ", family '" + name_ + "' expects " + std::to_string(n_));
  }
  return coeff(x) * du;
}

VectorFieldFamily make_family(FamilyKind kind, int n) {
  switch (kind) {
    case FamilyKind::euclidean: {
      if (n < 1) throw ConfigError("euclidean family needs n >= 1");
      return VectorFieldFamily(
          "euclidean:" + std::to_string(n), n, n,
          [n](const Point&) -> Mat { return Mat::Identity(n, n); }, "");
    }
    case FamilyKind::grushin:
      return VectorFieldFamily(
          "grushin", 2, 2,
          [](const Point& x) -> Mat {
            Mat c(2, 2);
            c << 1.0, 0.0, 0.0, x[0];
            return c;
          },
          "line x = 0");
    case FamilyKind::heisenberg:
      return VectorFieldFamily(
          "heisenberg", 3, 2,
          [](const Point& x) -> Mat {
            Mat c(2, 3);
            c << 1.0, 0.0, -0.5 * x[1], 0.0, 1.0, 0.5 * x[0];
            return c;
          },
          "");
  }
  throw ConfigError("unknown vector field family kind");
}

VectorFieldFamily make_family(std::string_view spec) {
  if (spec == "grushin") return make_family(FamilyKind::grushin);
  if (spec == "heisenberg") return make_family(FamilyKind::heisenberg);
  constexpr std::string_view prefix = "euclidean:";
  if (spec.starts_with(prefix)) {
    auto digits = spec.substr(prefix.size());
    int n = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (ec != std::errc{} || ptr != digits.data() + digits.size()) {
      throw ConfigError("bad euclidean dimension in family spec '" + std::string(spec) + "'");
    }
    return make_family(FamilyKind::euclidean, n);
  }
  throw ConfigError("unknown vector field family '" + std::string(spec) +
                    "' (expected euclidean:<n>, grushin or heisenberg)");
}

int coefficient_rank(const VectorFieldFamily& family, const Point& x) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(family.coeff(x)));
  const auto& s = svd.singularValues();
  const double cut = 64.0 * std::numeric_limits<double>::epsilon() *
                     std::max(1.0, s.size() > 0 ? s[0] : 0.0);
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] > cut) ++rank;
  }
  return rank;
}

LicReport lic_report_at(const VectorFieldFamily& family, std::span<const Point> points) {
  LicReport report;
  report.n_samples = points.size();
  std::size_t deficient = 0;
  for (const auto& x : points) {
    if (coefficient_rank(family, x) < family.m()) {
      ++deficient;
      if (report.witnesses.size() < 10) report.witnesses.push_back(x);
    }
  }
  report.deficient_fraction =
      points.empty() ? 0.0 : static_cast<double>(deficient) / static_cast<double>(points.size());
  return report;
}

LicReport lic_report(const VectorFieldFamily& family, const Box& box, int n_samples,
                     std::uint64_t seed) {
  if (n_samples < 1) throw ContractViolation("lic_report: n_samples must be >= 1");
  if (box.dim() != family.n()) throw ContractViolation("lic_report: box dimension mismatch");
  Rng rng(seed);
  std::vector<Point> points;
  points.reserve(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) points.push_back(sample_in_box(rng, box));
  return lic_report_at(family, points);
}

double lipschitz_estimate(const VectorFieldFamily& family, const Box& box, int n_pairs,
                          std::uint64_t seed) {
  if (box.dim() != family.n()) {
    throw ContractViolation("lipschitz_estimate: box dimension mismatch");
  }
  Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < n_pairs; ++i) {
    const Point x = sample_in_box(rng, box);
    const Point y = sample_in_box(rng, box);
    const double dist = (x - y).norm();
    if (dist < 1e-12) continue;
    worst = std::max(worst, (family.coeff(x) - family.coeff(y)).norm() / dist);
  }
  return worst;
}

}  // namespace gconv
