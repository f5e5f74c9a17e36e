#include "bcrb/grid_fields.hpp"

#include "bcrb/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

namespace bcrb {

// ---------------------------------------------------------------------------
// ParameterGrid
// ---------------------------------------------------------------------------

ParameterGrid::ParameterGrid(std::vector<double> lower, std::vector<double> upper,
                             std::vector<int> nodes)
    : lower_(std::move(lower)), upper_(std::move(upper)), nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw InvalidArgument("ParameterGrid: dimension must be positive");
  if (lower_.size() != nodes_.size() || upper_.size() != nodes_.size())
    throw InvalidArgument("ParameterGrid: lower/upper/nodes must have equal length");
  spacing_.resize(nodes_.size());
  strides_.resize(nodes_.size());
  size_ = 1;
  for (std::size_t a = 0; a < nodes_.size(); ++a) {
    if (nodes_[a] < 3)
      throw InvalidArgument("ParameterGrid: need at least 3 nodes on axis " + std::to_string(a));
    if (!(upper_[a] > lower_[a]))
      throw InvalidArgument("ParameterGrid: upper must exceed lower on axis " + std::to_string(a));
    spacing_[a] = (upper_[a] - lower_[a]) / (nodes_[a] - 1);
    strides_[a] = size_;
    size_ *= nodes_[a];
  }
}

ParameterGrid ParameterGrid::line(double lower, double upper, int nodes) {
  return ParameterGrid({lower}, {upper}, {nodes});
}

double ParameterGrid::max_spacing() const {
  return *std::max_element(spacing_.begin(), spacing_.end());
}

std::vector<int> ParameterGrid::multi_index(Index node) const {
  std::vector<int> idx(nodes_.size());
  for (int a = 0; a < dim(); ++a) idx[a] = axis_index(node, a);
  return idx;
}

Index ParameterGrid::flat_index(const std::vector<int>& idx) const {
  Index flat = 0;
  for (int a = 0; a < dim(); ++a) flat += strides_[a] * idx[a];
  return flat;
}

Vec ParameterGrid::coords(Index node) const {
  Vec x(dim());
  for (int a = 0; a < dim(); ++a) x[a] = coord(node, a);
  return x;
}

bool ParameterGrid::is_boundary(Index node) const {
  for (int a = 0; a < dim(); ++a) {
    const int i = axis_index(node, a);
    if (i == 0 || i == nodes_[a] - 1) return true;
  }
  return false;
}

double ParameterGrid::trapezoid_weight(Index node) const {
  double w = 1.0;
  for (int a = 0; a < dim(); ++a) {
    const int i = axis_index(node, a);
    w *= (i == 0 || i == nodes_[a] - 1) ? 0.5 * spacing_[a] : spacing_[a];
  }
  return w;
}

double ParameterGrid::cell_volume() const {
  double v = 1.0;
  for (double h : spacing_) v *= h;
  return v;
}

Index ParameterGrid::cell_count() const {
  Index n = 1;
  for (int count : nodes_) n *= count - 1;
  return n;
}

Index ParameterGrid::cell_base_node(Index cell) const {
  Index node = 0;
  for (int a = 0; a < dim(); ++a) {
    const Index cells_a = nodes_[a] - 1;
    node += strides_[a] * (cell % cells_a);
    cell /= cells_a;
  }
  return node;
}

ParameterGrid ParameterGrid::refined(int factor) const {
  if (factor < 1) throw InvalidArgument("ParameterGrid::refined: factor must be >= 1");
  std::vector<int> nodes(nodes_.size());
  for (std::size_t a = 0; a < nodes_.size(); ++a) nodes[a] = (nodes_[a] - 1) * factor + 1;
  return ParameterGrid(lower_, upper_, nodes);
}

bool ParameterGrid::operator==(const ParameterGrid& other) const {
  return nodes_ == other.nodes_ && lower_ == other.lower_ && upper_ == other.upper_;
}

std::string ParameterGrid::describe() const {
  std::ostringstream os;
  os.precision(6);
  os << "grid[";
  for (int a = 0; a < dim(); ++a) {
    if (a) os << " x ";
    os << "[" << lower_[a] << ", " << upper_[a] << "]/" << nodes_[a];
  }
  os << "]";
  return os.str();
}

// ---------------------------------------------------------------------------
// Fields
// ---------------------------------------------------------------------------

ScalarField::ScalarField(ParameterGrid grid, Vec values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_.size())
    throw InvalidArgument("ScalarField: value count does not match " + grid_.describe());
}

ScalarField ScalarField::constant(const ParameterGrid& grid, double value) {
  return ScalarField(grid, Vec::Constant(grid.size(), value));
}

ScalarField ScalarField::from_function(const ParameterGrid& grid,
                                       const std::function<double(const Vec&)>& f) {
  Vec values(grid.size());
  for (Index i = 0; i < grid.size(); ++i) values[i] = f(grid.coords(i));
  return ScalarField(grid, std::move(values));
}

VectorField::VectorField(ParameterGrid grid, Mat values, Variance variance)
    : grid_(std::move(grid)), values_(std::move(values)), variance_(variance) {
  if (values_.rows() != grid_.size() || values_.cols() != grid_.dim())
    throw InvalidArgument("VectorField: expected " + std::to_string(grid_.size()) + " x " +
                          std::to_string(grid_.dim()) + " values on " + grid_.describe());
}

VectorField VectorField::constant(const ParameterGrid& grid, const Vec& value, Variance variance) {
  if (value.size() != grid.dim()) throw InvalidArgument("VectorField::constant: size mismatch");
  Mat values = value.transpose().replicate(grid.size(), 1);
  return VectorField(grid, std::move(values), variance);
}

VectorField VectorField::zero(const ParameterGrid& grid, Variance variance) {
  return VectorField(grid, Mat::Zero(grid.size(), grid.dim()), variance);
}

VectorField VectorField::from_function(const ParameterGrid& grid,
                                       const std::function<Vec(const Vec&)>& f,
                                       Variance variance) {
  Mat values(grid.size(), grid.dim());
  for (Index i = 0; i < grid.size(); ++i) {
    const Vec v = f(grid.coords(i));
    if (v.size() != grid.dim()) throw InvalidArgument("VectorField::from_function: size mismatch");
    values.row(i) = v.transpose();
  }
  return VectorField(grid, std::move(values), variance);
}

Vec VectorField::flat() const {
  const int p = components();
  Vec out(values_.rows() * p);
  for (Index i = 0; i < values_.rows(); ++i)
    for (int a = 0; a < p; ++a) out[i * p + a] = values_(i, a);
  return out;
}

VectorField VectorField::from_flat(const ParameterGrid& grid, const Vec& flat, Variance variance) {
  const int p = grid.dim();
  if (flat.size() != grid.size() * p) throw InvalidArgument("VectorField::from_flat: size mismatch");
  Mat values(grid.size(), p);
  for (Index i = 0; i < grid.size(); ++i)
    for (int a = 0; a < p; ++a) values(i, a) = flat[i * p + a];
  return VectorField(grid, std::move(values), variance);
}

MatrixField::MatrixField(ParameterGrid grid, std::vector<Mat> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (static_cast<Index>(values_.size()) != grid_.size())
    throw InvalidArgument("MatrixField: value count does not match " + grid_.describe());
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const Mat& m = values_[i];
    if (m.rows() != m.cols() || m.rows() != values_.front().rows())
      throw InvalidArgument("MatrixField: node values must be square and of equal size");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw InvalidArgument("MatrixField: value at node " + std::to_string(i) + " is not symmetric");
  }
}

MatrixField MatrixField::constant(const ParameterGrid& grid, const Mat& value) {
  return MatrixField(grid, std::vector<Mat>(grid.size(), value));
}

MatrixField MatrixField::identity(const ParameterGrid& grid) {
  return constant(grid, Mat::Identity(grid.dim(), grid.dim()));
}

MatrixField MatrixField::from_function(const ParameterGrid& grid,
                                       const std::function<Mat(const Vec&)>& f) {
  std::vector<Mat> values;
  values.reserve(grid.size());
  for (Index i = 0; i < grid.size(); ++i) {
    Mat m = f(grid.coords(i));
    values.push_back(0.5 * (m + m.transpose()));
  }
  return MatrixField(grid, std::move(values));
}

void MatrixField::require_positive_definite(const std::string& what) const {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    Eigen::LLT<Mat> llt(values_[i]);
    if (llt.info() != Eigen::Success)
      throw InvalidArgument(what + " is not positive definite at node " + std::to_string(i) +
                            " (" + grid_.describe() + ")");
  }
}

void require_same_grid(const ParameterGrid& a, const ParameterGrid& b, const std::string& context) {
  if (a != b)
    throw GridMismatchError(context + ": grid mismatch between " + a.describe() + " and " +
                            b.describe());
}

// ---------------------------------------------------------------------------
// Quadrature and differences
// ---------------------------------------------------------------------------

ScalarField sqrt_det(const MatrixField& metric) {
  const auto& grid = metric.grid();
  Vec values(grid.size());
  for (Index i = 0; i < grid.size(); ++i) {
    const double det = metric[i].determinant();
    if (!(det > 0.0))
      throw InvalidArgument("metric determinant is not positive at node " + std::to_string(i));
    values[i] = std::sqrt(det);
  }
  return ScalarField(grid, std::move(values));
}

double integrate(const ScalarField& field, const MatrixField& metric) {
  require_same_grid(field.grid(), metric.grid(), "integrate");
  const ScalarField sg = sqrt_det(metric);
  const auto& grid = field.grid();
  double sum = 0.0;
  for (Index i = 0; i < grid.size(); ++i) sum += grid.trapezoid_weight(i) * field[i] * sg[i];
  return sum;
}

double integrate(const ScalarField& field) {
  const auto& grid = field.grid();
  double sum = 0.0;
  for (Index i = 0; i < grid.size(); ++i) sum += grid.trapezoid_weight(i) * field[i];
  return sum;
}

Vec partial_derivative(const ParameterGrid& grid, const Vec& values, int axis) {
  const Index s = grid.stride(axis);
  const int n = grid.nodes(axis);
  const double h = grid.spacing(axis);
  Vec out(grid.size());
  for (Index node = 0; node < grid.size(); ++node) {
    const int i = grid.axis_index(node, axis);
    if (i == 0) {
      out[node] = (-3.0 * values[node] + 4.0 * values[node + s] - values[node + 2 * s]) / (2.0 * h);
    } else if (i == n - 1) {
      out[node] = (3.0 * values[node] - 4.0 * values[node - s] + values[node - 2 * s]) / (2.0 * h);
    } else {
      out[node] = (values[node + s] - values[node - s]) / (2.0 * h);
    }
  }
  return out;
}

VectorField gradient(const ScalarField& field) {
  const auto& grid = field.grid();
  Mat values(grid.size(), grid.dim());
  for (int a = 0; a < grid.dim(); ++a) values.col(a) = partial_derivative(grid, field.values(), a);
  return VectorField(grid, std::move(values), Variance::covariant);
}

double boundary_residual(const ScalarField& rho, const VectorField& v) {
  require_same_grid(rho.grid(), v.grid(), "boundary_residual");
  const auto& grid = rho.grid();
  double max_all = 0.0, max_boundary = 0.0;
  for (Index i = 0; i < grid.size(); ++i) {
    const double mag = std::abs(rho[i]) * v.values().row(i).norm();
    max_all = std::max(max_all, mag);
    if (grid.is_boundary(i)) max_boundary = std::max(max_boundary, mag);
  }
  return max_all > 0.0 ? max_boundary / max_all : 0.0;
}

void require_density_floor(const ScalarField& rho, const std::string& context) {
  const auto& grid = rho.grid();
  const double floor = kDensityFloor * rho.values().maxCoeff();
  for (Index i = 0; i < grid.size(); ++i) {
    if (!grid.is_boundary(i) && !(rho[i] > floor)) {
      std::ostringstream os;
      os << context << ": density " << rho[i] << " below floor " << floor
         << " at interior node " << i << " (theta = " << grid.coords(i).transpose() << ")";
      throw DensityFloorError(os.str());
    }
  }
}

WeightedDivergence weighted_divergence(const ScalarField& rho, const VectorField& v,
                                       const MatrixField& metric) {
  require_same_grid(rho.grid(), v.grid(), "weighted_divergence");
  require_same_grid(rho.grid(), metric.grid(), "weighted_divergence");
  if (v.variance() != Variance::contravariant)
    throw InvalidArgument("weighted_divergence: v must be contravariant");
  require_density_floor(rho, "weighted_divergence");

  const auto& grid = rho.grid();
  const ScalarField sg = sqrt_det(metric);
  Vec div = Vec::Zero(grid.size());
  for (int a = 0; a < grid.dim(); ++a) {
    const Vec flux = sg.values().cwiseProduct(rho.values()).cwiseProduct(v.values().col(a));
    div += partial_derivative(grid, flux, a);
  }
  const double floor = kDensityFloor * rho.values().maxCoeff();
  for (Index i = 0; i < grid.size(); ++i) {
    const double denom = sg[i] * rho[i];
    // Boundary nodes below the floor carry no mass; report zero there.
    div[i] = rho[i] > floor ? div[i] / denom : 0.0;
  }
  WeightedDivergence out{ScalarField(grid, std::move(div)), boundary_residual(rho, v), false};
  out.boundary_warning = out.boundary_residual > kBoundaryTolerance;
  return out;
}

// ---------------------------------------------------------------------------
// CellDivergence
// ---------------------------------------------------------------------------

CellDivergence::CellDivergence(const ScalarField& psi, const MatrixField& metric)
    : grid_(psi.grid()) {
  require_same_grid(psi.grid(), metric.grid(), "CellDivergence");
  const int p = grid_.dim();
  const int corners = 1 << p;
  const double corner_share = 1.0 / corners;
  const ScalarField sg = sqrt_det(metric);
  const Index cells = grid_.cell_count();

  std::vector<Index> corner_offset(corners, 0);
  for (int k = 0; k < corners; ++k)
    for (int a = 0; a < p; ++a)
      if (k & (1 << a)) corner_offset[k] += grid_.stride(a);

  cell_weights_.resize(cells);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(cells) * corners * p);
  Vec dpsi(p);
  for (Index c = 0; c < cells; ++c) {
    const Index base = grid_.cell_base_node(c);
    double psi_c = 0.0, sg_c = 0.0;
    dpsi.setZero();
    for (int k = 0; k < corners; ++k) {
      const Index node = base + corner_offset[k];
      psi_c += corner_share * psi[node];
      sg_c += corner_share * sg[node];
      for (int a = 0; a < p; ++a) {
        const double sign = (k & (1 << a)) ? 1.0 : -1.0;
        dpsi[a] += sign * psi[node] * 2.0 * corner_share / grid_.spacing(a);
      }
    }
    cell_weights_[c] = grid_.cell_volume() * sg_c;
    for (int k = 0; k < corners; ++k) {
      const Index node = base + corner_offset[k];
      for (int a = 0; a < p; ++a) {
        const double sign = (k & (1 << a)) ? 1.0 : -1.0;
        const double div_part =
            psi_c / sg_c * sign * 2.0 * corner_share / grid_.spacing(a) * sg[node];
        const double transport_part = 2.0 * dpsi[a] * corner_share;
        triplets.emplace_back(c, node * p + a, div_part + transport_part);
      }
    }
  }
  matrix_.resize(cells, grid_.size() * p);
  matrix_.setFromTriplets(triplets.begin(), triplets.end());
}

Vec CellDivergence::apply(const VectorField& v) const {
  require_same_grid(grid_, v.grid(), "CellDivergence::apply");
  return matrix_ * v.flat();
}

Vec CellDivergence::cell_average(const Vec& node_values) const {
  const int p = grid_.dim();
  const int corners = 1 << p;
  Vec out(grid_.cell_count());
  for (Index c = 0; c < out.size(); ++c) {
    const Index base = grid_.cell_base_node(c);
    double sum = 0.0;
    for (int k = 0; k < corners; ++k) {
      Index node = base;
      for (int a = 0; a < p; ++a)
        if (k & (1 << a)) node += grid_.stride(a);
      sum += node_values[node];
    }
    out[c] = sum / corners;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Interpolation
// ---------------------------------------------------------------------------

namespace {

// Lagrange weights for the 4-point stencil starting at `first` (clamped to the axis).
void cubic_stencil(const ParameterGrid& grid, int axis, double x, int& first, double w[4]) {
  const int n = grid.nodes(axis);
  const double h = grid.spacing(axis);
  const double s = (x - grid.lower(axis)) / h;
  int i = static_cast<int>(std::floor(s));
  first = std::clamp(i - 1, 0, n - 4 >= 0 ? n - 4 : 0);
  const int count = std::min(4, n);
  for (int k = 0; k < 4; ++k) w[k] = 0.0;
  for (int k = 0; k < count; ++k) {
    double l = 1.0;
    for (int j = 0; j < count; ++j) {
      if (j == k) continue;
      l *= (s - (first + j)) / static_cast<double>(k - j);
    }
    w[k] = l;
  }
}

}  // namespace

double interpolate_cubic(const ParameterGrid& grid, const Vec& values, const Vec& point) {
  const int p = grid.dim();
  if (point.size() != p) throw InvalidArgument("interpolate_cubic: point dimension mismatch");
  std::vector<int> first(p);
  std::vector<std::array<double, 4>> weights(p);
  for (int a = 0; a < p; ++a) {
    const double tol = 1e-9 * (grid.upper(a) - grid.lower(a));
    if (point[a] < grid.lower(a) - tol || point[a] > grid.upper(a) + tol)
      throw InvalidArgument("interpolate_cubic: point outside " + grid.describe());
    double w[4];
    cubic_stencil(grid, a, point[a], first[a], w);
    std::copy(w, w + 4, weights[a].begin());
  }
  const int stencil = 1 << (2 * p);
  double sum = 0.0;
  for (int k = 0; k < stencil; ++k) {
    double w = 1.0;
    Index node = 0;
    for (int a = 0; a < p; ++a) {
      const int offset = (k >> (2 * a)) & 3;
      w *= weights[a][offset];
      node += grid.stride(a) * (first[a] + offset);
    }
    if (w != 0.0) sum += w * values[node];
  }
  return sum;
}

}  // namespace bcrb
