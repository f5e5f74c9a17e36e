#pragma once

// Wave picture of the Gill-Levit bound: with rho = psi^2 the functionals become
// quadratic in psi, and for constant v (flat metric) the worst-case bound is
//
//   B_worst = A^2 / E_min,   E_min = min <psi, H psi>,   H = n F(theta) - 4 (v.d)^2,
//
// a ground-state problem with Dirichlet walls at the box boundary.
//
// Discretization: the energy is psi^T K psi with K = n diag(w F) + 4 D^T W D,
// D the cell-centered directional difference (the same stencil gl_bounds uses
// for <P>), and the norm is the trapezoid rule.  H = K / h^p on interior nodes.

#include "bcrb/gl_bounds.hpp"
#include "bcrb/grid_fields.hpp"
#include "bcrb/model_geometry.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace bcrb {

struct SchrodingerProblem {
  ParameterGrid grid;
  /// F(theta) = v^a F_ab v^b at every node; must be nonnegative.
  Vec potential;
  /// Constant direction v.
  Vec direction;
  /// Constant A = v.u used by bworst.
  double a = 1.0;
  /// Optional theta-dependent A (node values) used by lambda_scan.
  Vec a_field;
  /// Coefficient of the kinetic term; 4 for the bound, 0 only in tests.
  double kinetic = 4.0;

  /// 1D problem on [lo, hi] with v = 1 and potential f(tau).
  static SchrodingerProblem line(double lo, double hi, int nodes,
                                 const std::function<double(double)>& f, double a = 1.0);
  /// Problem along a constant v of a model.  Throws InvalidArgument for
  /// non-constant v or a non-flat metric (only the constant-v equation is implemented).
  static SchrodingerProblem from_model(const StatisticalModel& model, const VectorField& v);
};

class Hamiltonian {
 public:
  Hamiltonian(ParameterGrid grid, SparseMat energy, Vec weights);

  const ParameterGrid& grid() const { return grid_; }
  /// Quadratic form K over all nodes: <psi, H psi> = psi^T K psi.
  const SparseMat& energy_form() const { return energy_; }
  /// Trapezoid weights defining <psi, psi>.
  const Vec& weights() const { return weights_; }
  /// Symmetric interior matrix K_II / h^p (Dirichlet).
  const SparseMat& matrix() const { return matrix_; }
  const std::vector<Index>& interior() const { return interior_; }
  /// Max absolute row sum of matrix(), used as ||H||.
  double norm() const;

 private:
  ParameterGrid grid_;
  SparseMat energy_;
  Vec weights_;
  SparseMat matrix_;
  std::vector<Index> interior_;
};

Hamiltonian assemble_H(const SchrodingerProblem& problem, double n);

/// <psi, H psi> / <psi, psi>.
double energy(const Hamiltonian& h, const Vec& psi);
/// <psi, psi> with the trapezoid weights.
double norm_squared(const Hamiltonian& h, const Vec& psi);

struct GroundState {
  double energy = 0.0;
  /// Normalized, nonnegative, zero on the boundary.
  Vec psi;
  double residual = 0.0;
  int iterations = 0;
  std::string method;
};

/// Smallest eigenpair by shifted inverse iteration; dense fallback for <= 2000 nodes.
GroundState ground_state(const Hamiltonian& h);

struct WorstCase {
  double b_worst = 0.0;
  GroundState ground;
  /// Least favorable prior psi^2 (density with respect to d^p theta).
  ScalarField prior;
};

WorstCase bworst(const SchrodingerProblem& problem, double n);

/// <A>, <F>, <P> with rho = psi^2, using the half-density form D psi.
Functionals wave_functionals(const ScalarField& psi, const VectorField& v,
                             const StatisticalModel& model);

struct RateOptions {
  /// Potential exponent m and amplitude A of the envelope A |tau|^m, used for the width scale.
  double exponent = 2.0;
  double amplitude = 1.0;
  double a = 1.0;
  /// Nodes per width scale W_n = (4 / (n amplitude))^{1/(m+2)}.
  int nodes_per_width = 100;
  /// Initial box half-width in units of W_n.
  double initial_half_width = 8.0;
  /// Stop doubling once E_min changes by less than this fraction.
  double doubling_tolerance = 1e-3;
  int max_doublings = 8;
};

struct RateRow {
  double n = 0.0;
  double e_min = 0.0;
  double b_worst = 0.0;
  double e_trial = 0.0;
  double w_opt = 0.0;
  double half_width = 0.0;
  int nodes = 0;
};

struct RateFit {
  /// Least-squares slope of log B_worst against log n.
  double slope = 0.0;
  double intercept = 0.0;
  /// Slope of log E_trial against log n (expected 2/(m+2)).
  double trial_slope = 0.0;
  /// Slope of log W_opt against log n (expected -1/(m+2)).
  double width_exponent = 0.0;
  std::vector<RateRow> rows;
};

/// Ground-state energies of n F(tau) - 4 d^2 over n_list (>= 3 decades) on
/// boxes grown until E_min is stable, plus the scaled-bump trial energies.
RateFit rate_fit(const std::function<double(double)>& potential, const std::vector<double>& n_list,
                 const RateOptions& options = {});

/// min over W of the trial energy with psi(tau) = phi(tau / W) / sqrt(W),
/// phi = sqrt(4/3) cos^2(pi y / 2) on [-1, 1].  Returns (E, W).
std::pair<double, double> trial_energy(const std::function<double(double)>& potential, double n,
                                       double w_guess);

struct LambdaScan {
  double lambda = 0.0;
  double bound = 0.0;
  /// (lambda, B) for every generalized eigenpair kept.
  std::vector<std::pair<double, double>> table;
};

/// Generalized eigenpairs H psi = lambda A psi (A > 0) with B = <psi, A psi> / lambda;
/// returns the largest B among eigenvalues inside [lambda_min, lambda_max].
LambdaScan lambda_scan(const SchrodingerProblem& problem, double n,
                       double lambda_min = 0.0,
                       double lambda_max = std::numeric_limits<double>::infinity());

}  // namespace bcrb
