#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/SparseCholesky>

#include "gconv/discretization.hpp"

namespace gconv {

XGradient::XGradient(VectorFieldFamily family, Grid grid)
    : family_(std::move(family)), grid_(std::move(grid)) {
  if (family_.n() != grid_.dim()) {
    throw ContractViolation("XGradient: family dimension " + std::to_string(family_.n()) +
                            " does not match grid dimension " + std::to_string(grid_.dim()));
  }
  const int n = grid_.dim();
  const int m = family_.m();
  const int corners = grid_.corners();

  centers_.reserve(grid_.cell_count());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(grid_.cell_count() * corners * m * n * 2);
  for (std::size_t c = 0; c < grid_.cell_count(); ++c) {
    centers_.push_back(grid_.cell_center(c));
    const Mat coeff = family_.coeff(centers_.back());
    for (int q = 0; q < corners; ++q) {
      const auto qp = c * corners + q;
      for (int d = 0; d < n; ++d) {
        const auto hi = grid_.cell_corner_node(c, q | (1 << d));
        const auto lo = grid_.cell_corner_node(c, q & ~(1 << d));
        const double inv_h = 1.0 / grid_.spacing(d);
        for (int k = 0; k < m; ++k) {
          const double ckd = coeff(k, d);
          if (ckd == 0.0) continue;
          const auto row = static_cast<int>(qp * m + k);
          triplets.emplace_back(row, static_cast<int>(hi), ckd * inv_h);
          triplets.emplace_back(row, static_cast<int>(lo), -ckd * inv_h);
        }
      }
    }
  }
  matrix_.resize(static_cast<Eigen::Index>(point_count() * m),
                 static_cast<Eigen::Index>(grid_.node_count()));
  matrix_.setFromTriplets(triplets.begin(), triplets.end());

  std::vector<int> column_of(grid_.node_count(), -1);
  for (std::size_t i = 0; i < grid_.node_count(); ++i) {
    if (!grid_.is_boundary(i)) {
      column_of[i] = static_cast<int>(interior_.size());
      interior_.push_back(i);
    }
  }
  std::vector<Eigen::Triplet<double>> inner;
  inner.reserve(triplets.size());
  for (const auto& t : triplets) {
    const int col = column_of[static_cast<std::size_t>(t.col())];
    if (col >= 0) inner.emplace_back(t.row(), col, t.value());
  }
  interior_matrix_.resize(matrix_.rows(), static_cast<Eigen::Index>(interior_.size()));
  interior_matrix_.setFromTriplets(inner.begin(), inner.end());
}

Eigen::VectorXd XGradient::apply_nodal(const Eigen::VectorXd& nodal) const {
  if (static_cast<std::size_t>(nodal.size()) != grid_.node_count()) {
    throw ContractViolation("XGradient: nodal vector size does not match grid");
  }
  return matrix_ * nodal;
}

FluxField XGradient::apply(const DiscreteFunction& u) const {
  if (!(u.grid() == grid_)) throw ContractViolation("XGradient: function lives on another grid");
  Eigen::VectorXd flat = apply_nodal(u.values());
  Eigen::MatrixXd values =
      Eigen::Map<Eigen::MatrixXd>(flat.data(), m(), static_cast<Eigen::Index>(point_count()));
  return FluxField(grid_, m(), std::move(values));
}

Eigen::VectorXd XGradient::weak_divergence_interior(const Eigen::VectorXd& flat_flux) const {
  return interior_matrix_.transpose() * flat_flux * (point_weight() / grid_.nodal_volume());
}

DiscreteFunction XGradient::weak_divergence(const FluxField& flux) const {
  if (!(flux.grid() == grid_) || flux.m() != m()) {
    throw ContractViolation("weak_divergence: flux shape does not match this gradient");
  }
  const Eigen::VectorXd flat =
      Eigen::Map<const Eigen::VectorXd>(flux.values().data(), flux.values().size());
  return DiscreteFunction(grid_, extend_from_interior(weak_divergence_interior(flat)), true);
}

Eigen::VectorXd XGradient::restrict_to_interior(const Eigen::VectorXd& nodal) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(interior_.size()));
  for (std::size_t k = 0; k < interior_.size(); ++k) {
    out[static_cast<Eigen::Index>(k)] = nodal[static_cast<Eigen::Index>(interior_[k])];
  }
  return out;
}

Eigen::VectorXd XGradient::extend_from_interior(const Eigen::VectorXd& interior) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid_.node_count()));
  for (std::size_t k = 0; k < interior_.size(); ++k) {
    out[static_cast<Eigen::Index>(interior_[k])] = interior[static_cast<Eigen::Index>(k)];
  }
  return out;
}

Eigen::SparseMatrix<double> XGradient::stiffness() const {
  Eigen::SparseMatrix<double> r = interior_matrix_.transpose() * interior_matrix_;
  r *= point_weight();
  return r;
}

double XGradient::pairing(const DiscreteFunction& g, const DiscreteFunction& v) const {
  if (!(g.grid() == grid_) || !(v.grid() == grid_)) {
    throw ContractViolation("pairing: functions live on another grid");
  }
  double s = 0.0;
  for (auto i : interior_) s += g[i] * v[i];
  return s * grid_.nodal_volume();
}

FluxField discrete_x_gradient(const VectorFieldFamily& family, const DiscreteFunction& u) {
  return XGradient(family, u.grid()).apply(u);
}

double lp_norm(const DiscreteFunction& u, double p) {
  if (!(p >= 1.0)) throw ContractViolation("lp_norm: need p >= 1");
  const auto& grid = u.grid();
  const int k = grid.corners();
  double sum = 0.0;
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    double avg = 0.0;
    for (int q = 0; q < k; ++q) avg += u[grid.cell_corner_node(c, q)];
    sum += std::pow(std::abs(avg / k), p);
  }
  return std::pow(sum * grid.cell_volume(), 1.0 / p);
}

double lp_norm(const FluxField& flux, double p) {
  if (!(p >= 1.0)) throw ContractViolation("lp_norm: need p >= 1");
  double sum = 0.0;
  for (Eigen::Index j = 0; j < flux.values().cols(); ++j) {
    sum += std::pow(flux.values().col(j).norm(), p);
  }
  const double w = flux.grid().cell_volume() / flux.grid().corners();
  return std::pow(sum * w, 1.0 / p);
}

double v_norm(const XGradient& xg, const DiscreteFunction& u, double p) {
  return lp_norm(xg.apply(u), p);
}

struct RieszMap::Impl {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
};

RieszMap::RieszMap(std::shared_ptr<const XGradient> xg)
    : xg_(std::move(xg)), impl_(std::make_shared<Impl>()) {
  impl_->ldlt.compute(xg_->stiffness());
  if (impl_->ldlt.info() != Eigen::Success || (impl_->ldlt.vectorD().array() <= 0.0).any()) {
    throw DegenerateSystem("Riesz map: X-Laplacian is singular on this grid");
  }
}

Eigen::VectorXd RieszMap::solve_interior(const Eigen::VectorXd& rhs) const {
  return impl_->ldlt.solve(rhs);
}

DiscreteFunction RieszMap::solve(const DiscreteFunction& g) const {
  const Eigen::VectorXd rhs = xg_->restrict_to_interior(g.values()) * xg_->grid().nodal_volume();
  return DiscreteFunction(xg_->grid(), xg_->extend_from_interior(solve_interior(rhs)), true);
}

double RieszMap::norm_interior(const Eigen::VectorXd& g_interior) const {
  const double vol = xg_->grid().nodal_volume();
  const Eigen::VectorXd rhs = g_interior * vol;
  return std::sqrt(std::max(0.0, rhs.dot(solve_interior(rhs))));
}

double RieszMap::norm(const DiscreteFunction& g) const {
  if (!(g.grid() == xg_->grid())) throw ContractViolation("Riesz norm: density on another grid");
  return norm_interior(xg_->restrict_to_interior(g.values()));
}

SineDictionary::SineDictionary(const Grid& grid, int modes_per_axis) : grid_(grid) {
  if (modes_per_axis < 1) throw ConfigError("sine dictionary needs at least one mode per axis");
  const int n = grid.dim();
  for (int d = 0; d < n; ++d) {
    const int k = std::min(modes_per_axis, grid.nodes(d) - 2);
    per_axis_.push_back(k);
    const double a = grid.box().lower(d);
    const double len = grid.box().length(d);
    Eigen::MatrixXd nodes(k, grid.nodes(d));
    Eigen::MatrixXd cells(k, grid.nodes(d) - 1);
    for (int mode = 1; mode <= k; ++mode) {
      for (int i = 0; i < grid.nodes(d); ++i) {
        nodes(mode - 1, i) = std::sin(mode * std::numbers::pi * i / (grid.nodes(d) - 1));
      }
      for (int i = 0; i + 1 < grid.nodes(d); ++i) {
        const double x = a + (i + 0.5) * grid.spacing(d);
        cells(mode - 1, i) = std::sin(mode * std::numbers::pi * (x - a) / len);
      }
    }
    node_tables_.push_back(std::move(nodes));
    cell_tables_.push_back(std::move(cells));
  }
  std::size_t total = 1;
  for (int k : per_axis_) total *= static_cast<std::size_t>(k);
  modes_.reserve(total);
  for (std::size_t j = 0; j < total; ++j) {
    MultiIndex idx{};
    auto rest = j;
    for (int d = 0; d < n; ++d) {
      idx[d] = static_cast<int>(rest % static_cast<std::size_t>(per_axis_[d])) + 1;
      rest /= static_cast<std::size_t>(per_axis_[d]);
    }
    modes_.push_back(idx);
  }
}

DiscreteFunction SineDictionary::function(std::size_t j) const {
  const auto& k = modes_.at(j);
  Eigen::VectorXd v(static_cast<Eigen::Index>(grid_.node_count()));
  for (std::size_t i = 0; i < grid_.node_count(); ++i) {
    const auto idx = grid_.node_multi(i);
    double prod = 1.0;
    for (int d = 0; d < grid_.dim(); ++d) prod *= node_tables_[d](k[d] - 1, idx[d]);
    v[static_cast<Eigen::Index>(i)] = grid_.is_boundary(i) ? 0.0 : prod;
  }
  return DiscreteFunction(grid_, std::move(v), true);
}

// Contracts a tensor (axis 0 fastest, extents `extent`) with one table per
// axis, replacing extent[d] by tables[d].rows(). The output is ordered with
// mode index of axis 0 fastest, matching modes_.
Eigen::VectorXd SineDictionary::contract(const Eigen::VectorXd& tensor,
                                         const std::vector<Eigen::MatrixXd>& tables,
                                         const std::vector<int>& extent) const {
  Eigen::VectorXd current = tensor;
  std::vector<int> shape = extent;
  for (std::size_t d = 0; d < shape.size(); ++d) {
    std::size_t inner = 1;
    for (std::size_t e = 0; e < d; ++e) inner *= static_cast<std::size_t>(shape[e]);
    std::size_t outer = 1;
    for (std::size_t e = d + 1; e < shape.size(); ++e) outer *= static_cast<std::size_t>(shape[e]);
    const auto len = static_cast<std::size_t>(shape[d]);
    const auto k = static_cast<std::size_t>(tables[d].rows());
    Eigen::VectorXd next = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(inner * k * outer));
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < len; ++i) {
        for (std::size_t mode = 0; mode < k; ++mode) {
          const double s = tables[d](static_cast<Eigen::Index>(mode), static_cast<Eigen::Index>(i));
          if (s == 0.0) continue;
          const auto src = (o * len + i) * inner;
          const auto dst = (o * k + mode) * inner;
          for (std::size_t a = 0; a < inner; ++a) {
            next[static_cast<Eigen::Index>(dst + a)] += s * current[static_cast<Eigen::Index>(src + a)];
          }
        }
      }
    }
    current = std::move(next);
    shape[d] = static_cast<int>(k);
  }
  return current;
}

Eigen::VectorXd SineDictionary::nodal_pairings(const DiscreteFunction& g) const {
  if (!(g.grid() == grid_)) throw ContractViolation("dictionary pairing: density on another grid");
  Eigen::VectorXd masked = g.values();
  for (std::size_t i = 0; i < grid_.node_count(); ++i) {
    if (grid_.is_boundary(i)) masked[static_cast<Eigen::Index>(i)] = 0.0;
  }
  return contract(masked, node_tables_, grid_.nodes_per_axis()) * grid_.nodal_volume();
}

Eigen::MatrixXd SineDictionary::flux_pairings(const FluxField& flux) const {
  if (!(flux.grid() == grid_)) throw ContractViolation("dictionary pairing: flux on another grid");
  std::vector<int> cells;
  for (int d = 0; d < grid_.dim(); ++d) cells.push_back(grid_.nodes(d) - 1);
  const int corners = grid_.corners();
  Eigen::MatrixXd out(flux.m(), static_cast<Eigen::Index>(size()));
  for (int k = 0; k < flux.m(); ++k) {
    Eigen::VectorXd sums(static_cast<Eigen::Index>(grid_.cell_count()));
    for (std::size_t c = 0; c < grid_.cell_count(); ++c) {
      double s = 0.0;
      for (int q = 0; q < corners; ++q) s += flux.values()(k, static_cast<Eigen::Index>(c * corners + q));
      sums[static_cast<Eigen::Index>(c)] = s / corners;
    }
    out.row(k) = contract(sums, cell_tables_, cells).transpose() * grid_.cell_volume();
  }
  return out;
}

DualNormEstimator::DualNormEstimator(std::shared_ptr<const XGradient> xg, double p,
                                     int modes_per_axis)
    : xg_(std::move(xg)), p_(p), riesz_(xg_), modes_(modes_per_axis) {
  if (!(p_ >= 2.0)) throw ConfigError("dual norm: need p >= 2");
  if (p_ == 2.0) return;
  auto dict = std::make_shared<SineDictionary>(xg_->grid(), modes_);
  mode_norms_.resize(static_cast<Eigen::Index>(dict->size()));
  for (std::size_t j = 0; j < dict->size(); ++j) {
    mode_norms_[static_cast<Eigen::Index>(j)] = v_norm(*xg_, dict->function(j), p_);
  }
  dictionary_ = std::move(dict);
}

double DualNormEstimator::upper_bound_factor() const {
  return std::pow(xg_->grid().box().volume(), (p_ - 2.0) / (2.0 * p_));
}

double DualNormEstimator::upper_bound(const DiscreteFunction& g) const {
  return upper_bound_factor() * riesz_.norm(g);
}

double DualNormEstimator::estimate(const DiscreteFunction& g) const {
  if (p_ == 2.0) return riesz_.norm(g);
  const Eigen::VectorXd pair = dictionary_->nodal_pairings(g);
  double best = 0.0;
  for (Eigen::Index j = 0; j < pair.size(); ++j) {
    if (mode_norms_[j] > 0.0) best = std::max(best, std::abs(pair[j]) / mode_norms_[j]);
  }
  return best;
}

double dual_norm_estimate(const DiscreteFunction& g, const VectorFieldFamily& family, double p,
                          int modes_per_axis) {
  auto xg = std::make_shared<const XGradient>(family, g.grid());
  return DualNormEstimator(xg, p, modes_per_axis).estimate(g);
}

double poincare_quotient(const XGradient& xg, const DiscreteFunction& u, double p) {
  const double num = std::pow(lp_norm(u, p), p);
  const double den = std::pow(v_norm(xg, u, p), p);
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return num / den;
}

PoincareResult poincare_ratio(const VectorFieldFamily& family, const Grid& grid, double p,
                              int n_trials, std::uint64_t seed) {
  if (n_trials < 1) throw ContractViolation("poincare_ratio: n_trials must be >= 1");
  XGradient xg(family, grid);
  SineDictionary dict(grid, 4);
  std::vector<DiscreteFunction> modes;
  for (std::size_t j = 0; j < dict.size(); ++j) modes.push_back(dict.function(j));
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  PoincareResult result;
  for (int t = 0; t < n_trials; ++t) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.node_count()));
    for (std::size_t j = 0; j < dict.size(); ++j) {
      double k2 = 0.0;
      for (int d = 0; d < grid.dim(); ++d) k2 += double(dict.mode(j)[d]) * dict.mode(j)[d];
      v += modes[j].values() * (normal(rng) / k2);
    }
    const DiscreteFunction u(grid, std::move(v), true);
    const double q = poincare_quotient(xg, u, p);
    ++result.trials;
    if (!std::isfinite(q)) {
      ++result.degenerate_trials;
      result.warnings.push_back("trial " + std::to_string(t) +
                                ": Xu vanishes for a nonzero u (under-resolved degenerate fields)");
      continue;
    }
    result.ratio = std::max(result.ratio, q);
  }
  return result;
}

}  // namespace gconv
