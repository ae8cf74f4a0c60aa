#include <cmath>
#include <numeric>

#include "gconv/discretization.hpp"

namespace gconv {

Box::Box(std::vector<std::pair<double, double>> a) : axes(std::move(a)) {
  if (axes.empty() || static_cast<int>(axes.size()) > kMaxDim) {
    throw ConfigError("box must have between 1 and " + std::to_string(kMaxDim) + " axes");
  }
  for (const auto& [lo, hi] : axes) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo)) {
      throw ConfigError("box axis needs finite bounds with min < max");
    }
  }
}

double Box::volume() const {
  double v = 1.0;
  for (int d = 0; d < dim(); ++d) v *= length(d);
  return v;
}

bool Box::contains(const Point& x, double slack) const {
  if (x.size() != dim()) return false;
  for (int d = 0; d < dim(); ++d) {
    if (x[d] < lower(d) - slack || x[d] > upper(d) + slack) return false;
  }
  return true;
}

Box Box::unit(int n) { return cube(n, 0.0, 1.0); }

Box Box::cube(int n, double lo, double hi) {
  return Box(std::vector<std::pair<double, double>>(static_cast<std::size_t>(n), {lo, hi}));
}

Point sample_in_box(Rng& rng, const Box& box) {
  Point x(box.dim());
  for (int d = 0; d < box.dim(); ++d) {
    std::uniform_real_distribution<double> dist(box.lower(d), box.upper(d));
    x[d] = dist(rng);
  }
  return x;
}

Vec sample_in_ball(Rng& rng, int dim, double radius) {
  // Rejection from the enclosing cube keeps the draw uniform and seed-stable.
  std::uniform_real_distribution<double> dist(-radius, radius);
  Vec v(dim);
  while (true) {
    for (int d = 0; d < dim; ++d) v[d] = dist(rng);
    if (v.norm() <= radius) return v;
  }
}

Grid::Grid(Box box, std::vector<int> nodes_per_axis)
    : box_(std::move(box)), nodes_(std::move(nodes_per_axis)) {
  if (static_cast<int>(nodes_.size()) != box_.dim()) {
    throw ConfigError("grid: need one node count per box axis");
  }
  node_count_ = 1;
  cell_count_ = 1;
  cell_volume_ = 1.0;
  for (int d = 0; d < dim(); ++d) {
    if (nodes_[d] < 3) throw ConfigError("grid: need at least 3 nodes per axis");
    stride_.push_back(node_count_);
    node_count_ *= static_cast<std::size_t>(nodes_[d]);
    cell_count_ *= static_cast<std::size_t>(nodes_[d] - 1);
    spacing_.push_back(box_.length(d) / (nodes_[d] - 1));
    cell_volume_ *= spacing_.back();
  }
}

Grid::Grid(Box box, int nodes_per_axis)
    : Grid(box, std::vector<int>(static_cast<std::size_t>(box.dim()), nodes_per_axis)) {}

MultiIndex Grid::node_multi(std::size_t i) const {
  MultiIndex idx{};
  for (int d = 0; d < dim(); ++d) {
    idx[d] = static_cast<int>(i % static_cast<std::size_t>(nodes_[d]));
    i /= static_cast<std::size_t>(nodes_[d]);
  }
  return idx;
}

std::size_t Grid::node_index(const MultiIndex& idx) const {
  std::size_t i = 0;
  for (int d = 0; d < dim(); ++d) i += static_cast<std::size_t>(idx[d]) * stride_[d];
  return i;
}

Point Grid::node_point(std::size_t i) const {
  const auto idx = node_multi(i);
  Point x(dim());
  for (int d = 0; d < dim(); ++d) {
    // Last node lands exactly on the upper bound.
    x[d] = idx[d] == nodes_[d] - 1 ? box_.upper(d) : box_.lower(d) + idx[d] * spacing_[d];
  }
  return x;
}

bool Grid::is_boundary(std::size_t i) const {
  const auto idx = node_multi(i);
  for (int d = 0; d < dim(); ++d) {
    if (idx[d] == 0 || idx[d] == nodes_[d] - 1) return true;
  }
  return false;
}

MultiIndex Grid::cell_multi(std::size_t c) const {
  MultiIndex idx{};
  for (int d = 0; d < dim(); ++d) {
    const auto cells = static_cast<std::size_t>(nodes_[d] - 1);
    idx[d] = static_cast<int>(c % cells);
    c /= cells;
  }
  return idx;
}

Point Grid::cell_center(std::size_t c) const {
  const auto idx = cell_multi(c);
  Point x(dim());
  for (int d = 0; d < dim(); ++d) x[d] = box_.lower(d) + (idx[d] + 0.5) * spacing_[d];
  return x;
}

std::size_t Grid::cell_corner_node(std::size_t c, int q) const {
  auto idx = cell_multi(c);
  for (int d = 0; d < dim(); ++d) idx[d] += (q >> d) & 1;
  return node_index(idx);
}

DiscreteFunction::DiscreteFunction(Grid grid, Eigen::VectorXd values, bool zero_boundary)
    : grid_(std::move(grid)), values_(std::move(values)), zero_boundary_(zero_boundary) {
  if (static_cast<std::size_t>(values_.size()) != grid_.node_count()) {
    throw ContractViolation("discrete function: value count does not match grid nodes");
  }
  if (zero_boundary_) {
    for (std::size_t i = 0; i < grid_.node_count(); ++i) {
      if (grid_.is_boundary(i) && values_[static_cast<Eigen::Index>(i)] != 0.0) {
        throw ContractViolation("discrete function: zero_boundary set but boundary node is nonzero");
      }
    }
  }
}

DiscreteFunction DiscreteFunction::zeros(const Grid& grid) {
  return DiscreteFunction(grid, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.node_count())),
                          true);
}

DiscreteFunction DiscreteFunction::sample(const Grid& grid,
                                          const std::function<double(const Point&)>& fn,
                                          bool zero_boundary) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(grid.node_count()));
  for (std::size_t i = 0; i < grid.node_count(); ++i) {
    v[static_cast<Eigen::Index>(i)] =
        zero_boundary && grid.is_boundary(i) ? 0.0 : fn(grid.node_point(i));
  }
  return DiscreteFunction(grid, std::move(v), zero_boundary);
}

DiscreteFunction DiscreteFunction::pinned() const {
  Eigen::VectorXd v = values_;
  for (std::size_t i = 0; i < grid_.node_count(); ++i) {
    if (grid_.is_boundary(i)) v[static_cast<Eigen::Index>(i)] = 0.0;
  }
  return DiscreteFunction(grid_, std::move(v), true);
}

DiscreteFunction DiscreteFunction::operator+(const DiscreteFunction& other) const {
  if (!(grid_ == other.grid_)) throw ContractViolation("adding functions on different grids");
  return DiscreteFunction(grid_, values_ + other.values_, zero_boundary_ && other.zero_boundary_);
}

DiscreteFunction DiscreteFunction::operator-(const DiscreteFunction& other) const {
  if (!(grid_ == other.grid_)) throw ContractViolation("subtracting functions on different grids");
  return DiscreteFunction(grid_, values_ - other.values_, zero_boundary_ && other.zero_boundary_);
}

DiscreteFunction DiscreteFunction::operator*(double s) const {
  return DiscreteFunction(grid_, values_ * s, zero_boundary_);
}

FluxField::FluxField(Grid grid, int m, Eigen::MatrixXd values)
    : grid_(std::move(grid)), m_(m), values_(std::move(values)) {
  const auto expected = grid_.cell_count() * static_cast<std::size_t>(grid_.corners());
  if (values_.rows() != m_ || static_cast<std::size_t>(values_.cols()) != expected) {
    throw ContractViolation("flux field: shape does not match grid and m");
  }
}

Vec FluxField::cell_mean(std::size_t c) const {
  const int k = grid_.corners();
  Vec out = Vec::Zero(m_);
  for (int q = 0; q < k; ++q) out += values_.col(static_cast<Eigen::Index>(c * k + q));
  return out / k;
}

FluxField FluxField::operator-(const FluxField& other) const {
  if (!(grid_ == other.grid_) || m_ != other.m_) {
    throw ContractViolation("subtracting flux fields of different shape");
  }
  return FluxField(grid_, m_, values_ - other.values_);
}

}  // namespace gconv
