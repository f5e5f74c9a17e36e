#pragma once

// Discretized parameter boxes, node fields, quadrature and the differential
// operators shared by the bound modules.
//
// Node ordering: axis 0 varies fastest, i.e. flat = i0 + N0 * (i1 + N1 * (...)).

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <functional>
#include <string>
#include <vector>

namespace bcrb {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;
using SparseMat = Eigen::SparseMatrix<double>;

class ParameterGrid {
 public:
  ParameterGrid() = default;
  ParameterGrid(std::vector<double> lower, std::vector<double> upper, std::vector<int> nodes);

  static ParameterGrid line(double lower, double upper, int nodes);

  int dim() const { return static_cast<int>(nodes_.size()); }
  int nodes(int axis) const { return nodes_[axis]; }
  double lower(int axis) const { return lower_[axis]; }
  double upper(int axis) const { return upper_[axis]; }
  double spacing(int axis) const { return spacing_[axis]; }
  double max_spacing() const;

  /// Total node count, the product of per-axis counts.
  Index size() const { return size_; }
  Index stride(int axis) const { return strides_[axis]; }

  int axis_index(Index node, int axis) const {
    return static_cast<int>((node / strides_[axis]) % nodes_[axis]);
  }
  std::vector<int> multi_index(Index node) const;
  Index flat_index(const std::vector<int>& idx) const;

  double coord(Index node, int axis) const {
    return lower_[axis] + spacing_[axis] * axis_index(node, axis);
  }
  Vec coords(Index node) const;

  bool is_boundary(Index node) const;
  /// Product trapezoid weight of a node (half weight per boundary axis).
  double trapezoid_weight(Index node) const;
  /// Volume of one grid cell, the product of spacings.
  double cell_volume() const;

  Index cell_count() const;
  /// Flat index of the lowest corner of cell `cell` (cells ordered like nodes).
  Index cell_base_node(Index cell) const;

  /// Grid with (N-1)*factor+1 nodes per axis over the same box.
  ParameterGrid refined(int factor) const;

  bool operator==(const ParameterGrid& other) const;
  bool operator!=(const ParameterGrid& other) const { return !(*this == other); }

  std::string describe() const;

 private:
  std::vector<double> lower_, upper_, spacing_;
  std::vector<int> nodes_;
  std::vector<Index> strides_;
  Index size_ = 0;
};

class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(ParameterGrid grid, Vec values);

  static ScalarField constant(const ParameterGrid& grid, double value);
  static ScalarField from_function(const ParameterGrid& grid,
                                   const std::function<double(const Vec&)>& f);

  const ParameterGrid& grid() const { return grid_; }
  const Vec& values() const { return values_; }
  Vec& values() { return values_; }
  double operator[](Index node) const { return values_[node]; }
  double& operator[](Index node) { return values_[node]; }

 private:
  ParameterGrid grid_;
  Vec values_;
};

/// Index placement of vector components: u_a (covariant) or v^a (contravariant).
enum class Variance { covariant, contravariant };

class VectorField {
 public:
  VectorField() = default;
  /// `values` has one row per node and one column per component.
  VectorField(ParameterGrid grid, Mat values, Variance variance);

  static VectorField constant(const ParameterGrid& grid, const Vec& value, Variance variance);
  static VectorField zero(const ParameterGrid& grid, Variance variance);
  static VectorField from_function(const ParameterGrid& grid,
                                   const std::function<Vec(const Vec&)>& f, Variance variance);

  const ParameterGrid& grid() const { return grid_; }
  Variance variance() const { return variance_; }
  int components() const { return static_cast<int>(values_.cols()); }
  const Mat& values() const { return values_; }
  Mat& values() { return values_; }
  Vec at(Index node) const { return values_.row(node).transpose(); }

  /// Flattened (node-major) copy: entry node*p + a.
  Vec flat() const;
  static VectorField from_flat(const ParameterGrid& grid, const Vec& flat, Variance variance);

 private:
  ParameterGrid grid_;
  Mat values_;
  Variance variance_ = Variance::contravariant;
};

class MatrixField {
 public:
  MatrixField() = default;
  MatrixField(ParameterGrid grid, std::vector<Mat> values);

  static MatrixField constant(const ParameterGrid& grid, const Mat& value);
  static MatrixField identity(const ParameterGrid& grid);
  static MatrixField from_function(const ParameterGrid& grid,
                                   const std::function<Mat(const Vec&)>& f);

  const ParameterGrid& grid() const { return grid_; }
  const Mat& operator[](Index node) const { return values_[node]; }
  const std::vector<Mat>& values() const { return values_; }
  int rows() const { return values_.empty() ? 0 : static_cast<int>(values_.front().rows()); }

  /// Throws InvalidArgument unless every node value is positive definite.
  void require_positive_definite(const std::string& what) const;

 private:
  ParameterGrid grid_;
  std::vector<Mat> values_;
};

void require_same_grid(const ParameterGrid& a, const ParameterGrid& b, const std::string& context);

/// sqrt(|g|) at each node.
ScalarField sqrt_det(const MatrixField& metric);

/// Trapezoidal quadrature of value * sqrt(|g|) over the box.
double integrate(const ScalarField& field, const MatrixField& metric);
double integrate(const ScalarField& field);

/// Covariant gradient: central differences inside, second-order one-sided
/// differences on boundary nodes.
VectorField gradient(const ScalarField& field);

/// Partial derivative of node values along one axis with the same stencils.
Vec partial_derivative(const ParameterGrid& grid, const Vec& values, int axis);

/// Boundary-vanishing residual: max boundary |rho v| / max overall |rho v|.
double boundary_residual(const ScalarField& rho, const VectorField& v);

struct WeightedDivergence {
  ScalarField value;
  double boundary_residual = 0.0;
  bool boundary_warning = false;
};

/// Relative density floor below which 1/rho is not formed.
inline constexpr double kDensityFloor = 1e-12;
inline constexpr double kBoundaryTolerance = 1e-8;

/// (1/(sqrt|g| rho)) d_a(sqrt|g| rho v^a) on every node.
WeightedDivergence weighted_divergence(const ScalarField& rho, const VectorField& v,
                                       const MatrixField& metric);

/// Throws DensityFloorError if rho <= floor * max(rho) on an interior node.
void require_density_floor(const ScalarField& rho, const std::string& context);

/// Cell-centered half-density divergence operator.
///
/// For a fixed half density psi (rho = psi^2) this is the linear map
///   v  ->  [ (1/sqrt|g|) d_a(sqrt|g| v^a) ] psi + 2 v^a d_a psi
/// evaluated at cell centers, where node values are averaged over the 2^p
/// cell corners and d_a is the corner-averaged difference across the cell.
/// Its square integrated with `cell_weights()` is the prior term of the
/// Gill-Levit family; it never divides by rho.
class CellDivergence {
 public:
  CellDivergence(const ScalarField& psi, const MatrixField& metric);

  const ParameterGrid& grid() const { return grid_; }
  Vec apply(const VectorField& v) const;
  /// cells x (nodes * p), acting on VectorField::flat().
  const SparseMat& matrix() const { return matrix_; }
  /// Cell volume times sqrt|g| at the cell center.
  const Vec& cell_weights() const { return cell_weights_; }
  /// Average of node values over the corners of each cell.
  Vec cell_average(const Vec& node_values) const;

 private:
  ParameterGrid grid_;
  SparseMat matrix_;
  Vec cell_weights_;
};

/// Cubic (4-point Lagrange per axis) interpolation of node values at `point`.
/// Points outside the box raise InvalidArgument.
double interpolate_cubic(const ParameterGrid& grid, const Vec& values, const Vec& point);

}  // namespace bcrb
