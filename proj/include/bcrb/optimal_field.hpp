#pragma once

// The optimal Gill-Levit bound B_max = <u, L^{-1} u>_rho and its field equation
//
//   (L v)_a = n F_ab v^b - d_a[(1/rho) div(rho v)],   v = 0 on the boundary.
//
// The discrete operator is the Gram matrix of the discrete bound:
//   M = n * blockdiag(m_i F_i) + D^T diag(W) D,   m_i = w_i sqrt|g_i| rho_i,
// with D the cell-centered half-density divergence (CellDivergence) and W its
// cell weights, so v^T M v = n<F> + <P> exactly and (L v)_i = (M v)_i / m_i.

#include "bcrb/gl_bounds.hpp"
#include "bcrb/grid_fields.hpp"
#include "bcrb/model_geometry.hpp"

#include <string>
#include <vector>

namespace bcrb {

class OperatorL {
 public:
  OperatorL(const ParameterGrid& grid, double n, int components, SparseMat gram, Vec mass);

  const ParameterGrid& grid() const { return grid_; }
  double n() const { return n_; }
  /// Number of vector fields solved for jointly (q; 1 for the scalar bound).
  int components() const { return components_; }
  /// Unknowns per node: q * p.
  int block_size() const { return components_ * grid_.dim(); }
  /// Full Gram matrix over all nodes, flat index (node * q + j) * p + a.
  const SparseMat& gram() const { return gram_; }
  /// Quadrature mass m_i of each node.
  const Vec& mass() const { return mass_; }
  /// Flat indices of the unknowns not pinned by the Dirichlet condition.
  const std::vector<Index>& free_dofs() const { return free_; }

  /// (L v) at every node with positive mass, zero elsewhere.
  Vec apply(const Vec& v_flat) const;
  VectorField apply(const VectorField& v) const;
  /// Pairing <w, v>_rho = sum_i m_i w_i . v_i over flat vectors.
  double inner(const Vec& w_flat, const Vec& v_flat) const;
  /// Largest row sum of |M| / m, an upper bound on ||L||.
  double norm_bound() const;

 private:
  ParameterGrid grid_;
  double n_;
  int components_;
  SparseMat gram_;
  Vec mass_;
  std::vector<Index> free_;
};

/// Scalar-beta operator.  Requires rho above the density floor on interior nodes.
OperatorL assemble_L(const StatisticalModel& model, double n);

/// Vectoral operator with blocks n gamma^{jk} F - d[(gamma^{jk}/rho) div(rho .)].
OperatorL assemble_vectoral_L(const StatisticalModel& model, const MatrixField& gamma, double n);

struct SolveResult {
  /// Solution, flat, zero on Dirichlet nodes.
  Vec v;
  double residual = 0.0;
  std::string method;
  int iterations = 0;
};

/// Relative residual accepted as a converged solve.
inline constexpr double kSolveTolerance = 1e-8;
/// Residual above which u is declared outside the range of L.
inline constexpr double kRangeTolerance = 1e-6;

/// Solves L v = u (u flat, covariant).  Direct sparse LDL^T for p <= 2,
/// preconditioned conjugate gradients otherwise.
SolveResult solve_flat(const OperatorL& op, const Vec& u_flat);
VectorField solve_least_favorable(const OperatorL& op, const VectorField& u);

struct OptimalResult {
  BoundReport report;
  /// Attaining (least favorable) field; one per weight component for vectoral problems.
  std::vector<VectorField> v;
  double residual = 0.0;
  std::string solver;
};

OptimalResult bmax(const StatisticalModel& model, double n);
OptimalResult vectoral_bmax(const StatisticalModel& model, const VectoralWeight& weights, double n);

/// u^T (nF + G)^{-1} u for constant matrices.
double gaussian_closed_form(const Mat& f, const Mat& g, const Vec& u, double n);

}  // namespace bcrb
