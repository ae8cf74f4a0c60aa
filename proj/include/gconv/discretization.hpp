#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "gconv/common.hpp"
#include "gconv/vector_fields.hpp"

namespace gconv {

using MultiIndex = std::array<int, kMaxDim>;

/// Tensor grid of nodes on a box; nodes are numbered with axis 0 fastest.
class Grid {
 public:
  Grid() = default;
  Grid(Box box, std::vector<int> nodes_per_axis);
  Grid(Box box, int nodes_per_axis);

  int dim() const { return box_.dim(); }
  const Box& box() const { return box_; }
  int nodes(int d) const { return nodes_[d]; }
  const std::vector<int>& nodes_per_axis() const { return nodes_; }
  double spacing(int d) const { return spacing_[d]; }

  std::size_t node_count() const { return node_count_; }
  std::size_t cell_count() const { return cell_count_; }
  int corners() const { return 1 << dim(); }

  MultiIndex node_multi(std::size_t i) const;
  std::size_t node_index(const MultiIndex& idx) const;
  Point node_point(std::size_t i) const;
  bool is_boundary(std::size_t i) const;

  MultiIndex cell_multi(std::size_t c) const;
  Point cell_center(std::size_t c) const;
  /// Node at corner q of cell c; bit d of q selects the upper node along axis d.
  std::size_t cell_corner_node(std::size_t c, int q) const;

  double cell_volume() const { return cell_volume_; }
  /// Volume attached to an interior node in the lumped pairing.
  double nodal_volume() const { return cell_volume_; }

  bool operator==(const Grid& other) const {
    return box_ == other.box_ && nodes_ == other.nodes_;
  }

 private:
  Box box_;
  std::vector<int> nodes_;
  std::vector<double> spacing_;
  std::vector<std::size_t> stride_;
  std::size_t node_count_ = 0;
  std::size_t cell_count_ = 0;
  double cell_volume_ = 0.0;
};

/// Nodal values on a grid. With zero_boundary set, boundary nodes hold
/// exactly zero, the discrete counterpart of W^{1,p}_{X,0}.
class DiscreteFunction {
 public:
  DiscreteFunction() = default;
  DiscreteFunction(Grid grid, Eigen::VectorXd values, bool zero_boundary);

  static DiscreteFunction zeros(const Grid& grid);
  /// Samples fn at the nodes; boundary nodes are pinned to 0 when zero_boundary.
  static DiscreteFunction sample(const Grid& grid, const std::function<double(const Point&)>& fn,
                                 bool zero_boundary);

  const Grid& grid() const { return grid_; }
  const Eigen::VectorXd& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }
  bool zero_boundary() const { return zero_boundary_; }

  /// Copy with boundary nodes set to zero.
  DiscreteFunction pinned() const;

  DiscreteFunction operator+(const DiscreteFunction& other) const;
  DiscreteFunction operator-(const DiscreteFunction& other) const;
  DiscreteFunction operator*(double s) const;

 private:
  Grid grid_;
  Eigen::VectorXd values_;
  bool zero_boundary_ = false;
};

/// m-vector field sampled at the 2^n corner quadrature points of every cell.
/// Column (c * corners + q) holds the value at corner q of cell c.
class FluxField {
 public:
  FluxField() = default;
  FluxField(Grid grid, int m, Eigen::MatrixXd values);

  const Grid& grid() const { return grid_; }
  int m() const { return m_; }
  const Eigen::MatrixXd& values() const { return values_; }
  std::size_t point_count() const { return static_cast<std::size_t>(values_.cols()); }
  /// Average over the cell's quadrature points.
  Vec cell_mean(std::size_t c) const;

  FluxField operator-(const FluxField& other) const;

 private:
  Grid grid_;
  int m_ = 0;
  Eigen::MatrixXd values_;
};

/// Discrete X-gradient on a grid.
///
/// At corner q of cell c the Euclidean gradient is taken from the one-sided
/// differences along the cell edges through that corner, then multiplied by
/// C at the cell center. For affine u every corner returns the exact
/// gradient. All operators (solver, fluxes, norms) use this one gradient, so
/// the weak divergence below is its exact transpose.
class XGradient {
 public:
  XGradient(VectorFieldFamily family, Grid grid);

  const VectorFieldFamily& family() const { return family_; }
  const Grid& grid() const { return grid_; }
  int m() const { return family_.m(); }

  std::size_t point_count() const { return grid_.cell_count() * static_cast<std::size_t>(grid_.corners()); }
  double point_weight() const { return grid_.cell_volume() / grid_.corners(); }
  std::size_t point_cell(std::size_t qp) const { return qp / static_cast<std::size_t>(grid_.corners()); }
  const Point& cell_center(std::size_t c) const { return centers_[c]; }

  /// Rows (qp * m + k), columns nodes.
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& matrix() const { return matrix_; }

  FluxField apply(const DiscreteFunction& u) const;
  /// Same as apply() on raw nodal values, flattened as (qp * m + k).
  Eigen::VectorXd apply_nodal(const Eigen::VectorXd& nodal) const;

  /// Density at interior nodes of the functional v -> sum_q w_q (M_q, Xv_q).
  DiscreteFunction weak_divergence(const FluxField& flux) const;
  /// Raw version on flattened flux values; returns interior-node values.
  Eigen::VectorXd weak_divergence_interior(const Eigen::VectorXd& flat_flux) const;

  const std::vector<std::size_t>& interior_nodes() const { return interior_; }
  std::size_t interior_count() const { return interior_.size(); }
  Eigen::VectorXd restrict_to_interior(const Eigen::VectorXd& nodal) const;
  Eigen::VectorXd extend_from_interior(const Eigen::VectorXd& interior) const;

  /// Interior stiffness R_ij = sum_q w_q (X e_i, X e_j) of the unit X-Laplacian.
  Eigen::SparseMatrix<double> stiffness() const;

  /// Lumped pairing <g, v> = sum over interior nodes of vol * g_i * v_i.
  double pairing(const DiscreteFunction& g, const DiscreteFunction& v) const;

 private:
  VectorFieldFamily family_;
  Grid grid_;
  std::vector<Point> centers_;
  Eigen::SparseMatrix<double, Eigen::RowMajor> matrix_;
  Eigen::SparseMatrix<double> interior_matrix_;  // columns restricted to interior nodes
  std::vector<std::size_t> interior_;
};

FluxField discrete_x_gradient(const VectorFieldFamily& family, const DiscreteFunction& u);

/// (sum_cells |cell average|^p * vol)^(1/p).
double lp_norm(const DiscreteFunction& u, double p);
/// (sum_points |M_q|^p * w_q)^(1/p).
double lp_norm(const FluxField& flux, double p);

/// Norm of V used throughout: ||Xu||_{L^p}.
double v_norm(const XGradient& xg, const DiscreteFunction& u, double p);

/// Discrete Riesz map of the unit X-Laplacian; gives the exact discrete
/// V' norm for p = 2.
class RieszMap {
 public:
  explicit RieszMap(std::shared_ptr<const XGradient> xg);
  /// w solving R w = vol * g on interior nodes (zero boundary).
  DiscreteFunction solve(const DiscreteFunction& g) const;
  Eigen::VectorXd solve_interior(const Eigen::VectorXd& rhs) const;
  double norm(const DiscreteFunction& g) const;
  double norm_interior(const Eigen::VectorXd& g_interior) const;
  const XGradient& x_gradient() const { return *xg_; }

 private:
  struct Impl;
  std::shared_ptr<const XGradient> xg_;
  std::shared_ptr<Impl> impl_;
};

/// Tensor-product sine modes prod_d sin(k_d pi (x_d - a_d) / L_d),
/// 1 <= k_d <= K (capped at N_d - 2 so the modes stay resolvable).
class SineDictionary {
 public:
  SineDictionary(const Grid& grid, int modes_per_axis);

  std::size_t size() const { return modes_.size(); }
  const MultiIndex& mode(std::size_t j) const { return modes_[j]; }
  int modes_per_axis(int d) const { return per_axis_[d]; }

  DiscreteFunction function(std::size_t j) const;
  /// Lumped nodal pairings <g, psi_j> for all j.
  Eigen::VectorXd nodal_pairings(const DiscreteFunction& g) const;
  /// Cell-center quadrature integrals of every flux component against every
  /// mode; result is (m x size()).
  Eigen::MatrixXd flux_pairings(const FluxField& flux) const;

 private:
  Eigen::VectorXd contract(const Eigen::VectorXd& tensor, const std::vector<Eigen::MatrixXd>& tables,
                           const std::vector<int>& extent) const;

  Grid grid_;
  std::vector<int> per_axis_;
  std::vector<MultiIndex> modes_;
  std::vector<Eigen::MatrixXd> node_tables_;  // per axis: K_d x N_d
  std::vector<Eigen::MatrixXd> cell_tables_;  // per axis: K_d x (N_d - 1)
};

inline constexpr int kDefaultDualModes = 64;

/// Estimates of the discrete V' norm of densities.
///
/// p = 2: exact Riesz value sqrt(<g, w>) with R w = g.
/// p > 2: lower bound sup_j |<g, psi_j>| / ||X psi_j||_p over a sine dictionary.
/// upper_bound() is |Omega|^{(p-2)/(2p)} times the Riesz value, valid for
/// every p >= 2.
class DualNormEstimator {
 public:
  DualNormEstimator(std::shared_ptr<const XGradient> xg, double p,
                    int modes_per_axis = kDefaultDualModes);

  double p() const { return p_; }
  double estimate(const DiscreteFunction& g) const;
  double upper_bound(const DiscreteFunction& g) const;
  double upper_bound_factor() const;
  const RieszMap& riesz() const { return riesz_; }

 private:
  std::shared_ptr<const XGradient> xg_;
  double p_;
  RieszMap riesz_;
  int modes_;
  std::shared_ptr<const SineDictionary> dictionary_;  // built only for p > 2
  Eigen::VectorXd mode_norms_;
};

double dual_norm_estimate(const DiscreteFunction& g, const VectorFieldFamily& family, double p,
                          int modes_per_axis = kDefaultDualModes);

struct PoincareResult {
  double ratio = 0.0;  // max over trials of ||u||_p^p / ||Xu||_p^p
  int trials = 0;
  int degenerate_trials = 0;
  std::vector<std::string> warnings;
};

/// ||u||_p^p / ||Xu||_p^p for one zero-boundary function (infinite if Xu = 0).
double poincare_quotient(const XGradient& xg, const DiscreteFunction& u, double p);

/// Maximum quotient over seeded random smooth zero-boundary trial functions
/// (random combinations of the first sine modes with 1/|k|^2 decay).
PoincareResult poincare_ratio(const VectorFieldFamily& family, const Grid& grid, double p,
                              int n_trials, std::uint64_t seed = kDefaultSeed);

}  // namespace gconv
