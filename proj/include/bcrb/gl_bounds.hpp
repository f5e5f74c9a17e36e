#pragma once

// Gill-Levit family of Bayesian Cramer-Rao bounds
//
//   B = <A>^2 / (n <F> + <P>),  A = v.u,  F = v^T F v,  P = [(1/rho) div(rho v)]^2,
//
// with <.> the prior average against sqrt|g| d^p theta.
//
// Discretization: <A> and <F> use the node trapezoid rule.  <P> is evaluated
// on cell centers through the half density psi = sqrt(rho) (CellDivergence),
// which never divides by rho and keeps the quadratic form compact.

#include "bcrb/grid_fields.hpp"
#include "bcrb/model_geometry.hpp"

#include <string>
#include <vector>

namespace bcrb {

struct Functionals {
  double A = 0.0;
  double F = 0.0;
  double P = 0.0;
  double boundary_residual = 0.0;
};

struct BoundReport {
  double A = 0.0;
  double F = 0.0;
  double P = 0.0;
  double n = 0.0;
  double B = 0.0;
  std::string v_choice = "custom";
  double boundary_residual = 0.0;
  std::string grid;
  /// False for choices such as the Van Trees v that ignore the transformation law.
  bool contravariant = true;

  static std::string csv_header();
  /// Columns: n, A, F, P, B, v_choice, residual.
  std::string csv_row() const;
};

/// Tolerance on |integral(rho) - 1| accepted by the functionals.
inline constexpr double kNormalizationTolerance = 1e-6;

/// Prior averages of A, F and P.  Throws BoundaryError when rho v does not
/// vanish on the boundary (relative residual above kBoundaryTolerance).
Functionals functionals(const StatisticalModel& model, const VectorField& v);

/// Discrete <P> alone (same cell-centered scheme as functionals()).
double prior_term(const ScalarField& rho, const VectorField& v, const MatrixField& metric);

BoundReport gill_levit_bound(const StatisticalModel& model, const VectorField& v, double n,
                             const std::string& label = "custom");

/// v^a = (F^{-1})^{ab} u_b at every node.
VectorField natural_v(const StatisticalModel& model);

/// Gill-Levit bound with the natural v, where A = F = u F^{-1} u pointwise.
BoundReport natural_bound(const StatisticalModel& model, double n);

struct VanTreesResult {
  VectorField v;
  BoundReport report;
  Mat mean_fisher;
  Mat mean_prior_information;
};

/// Constant v = (n<F> + <G>)^{-1} <u>, G = (d ln pi)(d ln pi)^T.
VanTreesResult van_trees_v(const StatisticalModel& model, double n);

/// Prior-averaged G from finite differences of ln pi; pi must be positive on every node.
Mat mean_prior_information(const StatisticalModel& model);

struct VectoralWeight {
  /// q x q positive definite weight matrix gamma_jk per node.
  MatrixField gamma;
  /// u^j (covariant), one field per j.
  std::vector<VectorField> u;
  /// v_j (contravariant), one field per j.
  std::vector<VectorField> v;
};

/// <A> = <v_j.u^j>, <F> = <gamma^{jk} v_j F v_k>, <P> = <gamma^{jk} D_j D_k>.
BoundReport vectoral_bound(const StatisticalModel& model, const VectoralWeight& weights, double n);

}  // namespace bcrb
