#pragma once

// Finite-dimensional density-operator families: symmetric logarithmic
// derivatives, the Helstrom information K, the quantum bound Q_max (F -> K in
// the optimal-field machinery), the SNR characterization of K, and the quantum
// Gaussian shift model.

#include "bcrb/grid_fields.hpp"
#include "bcrb/model_geometry.hpp"
#include "bcrb/optimal_field.hpp"

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <optional>
#include <vector>

namespace bcrb {

using Complex = std::complex<double>;
using CMat = Eigen::MatrixXcd;

class DensityFamily {
 public:
  using StateFn = std::function<CMat(const Vec&)>;
  using DerivativeFn = std::function<std::vector<CMat>(const Vec&)>;

  /// rho(theta) on a d-dimensional Hilbert space with p parameters.  Without
  /// `derivative`, d rho / d theta^a uses central differences of step
  /// fd_step * max(1, |theta^a|).
  DensityFamily(int hilbert_dim, int params, StateFn rho, DerivativeFn derivative = {},
                double fd_step = 1e-5);

  int hilbert_dim() const { return dim_; }
  int params() const { return params_; }

  /// Validated state: trace 1 +- 1e-10, Hermitian to 1e-12, eigenvalues >= -1e-10.
  CMat rho(const Vec& theta) const;
  std::vector<CMat> derivatives(const Vec& theta) const;

  /// The family U rho U^dagger for a fixed unitary U.
  DensityFamily conjugated(const CMat& unitary) const;

 private:
  int dim_;
  int params_;
  StateFn rho_;
  DerivativeFn derivative_;
  double fd_step_;
};

/// Cutoff on p_j + p_k, relative to the trace, below which SLD elements are zero.
inline constexpr double kSldCutoff = 1e-12;

/// Hermitian S_a solving d_a rho = rho o S_a (Jordan product) on the support of rho.
std::vector<CMat> sld_scores(const DensityFamily& family, const Vec& theta);

/// K_ab = tr[rho S_a o S_b].
Mat helstrom_matrix(const DensityFamily& family, const Vec& theta);

/// K at every node of `grid`.
MatrixField helstrom_field(const DensityFamily& family, const ParameterGrid& grid);

/// Throws InvalidArgument unless K - F is PSD (to 1e-10 * trace K) at every node.
void require_dominates(const MatrixField& k, const MatrixField& f);

struct QmaxResult {
  OptimalResult quantum;
  /// B_max from the classical Fisher field, when one was supplied.
  std::optional<OptimalResult> classical;
};

/// Q_max: bmax with the Helstrom field in place of F.  With a classical Fisher
/// field, also checks K >= F and Q_max <= B_max + 1e-10.
QmaxResult qmax(const StatisticalModel& model, const MatrixField& helstrom, double n = 1.0,
                const std::optional<MatrixField>& classical_fisher = std::nullopt);

/// (v.d <Y>)^2 / tr[(Y - <Y>)^2 rho].
double snr_observable(const DensityFamily& family, const Vec& theta, const Vec& v, const CMat& y);

struct GaussianShiftBounds {
  /// u^T (K + G)^{-1} u
  double q_max = 0.0;
  /// u^T (K/2 + G)^{-1} u, attained with a heterodyne-type measurement.
  double achieved_risk = 0.0;
};

GaussianShiftBounds gaussian_shift_bounds(const Mat& k, const Mat& g, const Vec& u);

}  // namespace bcrb
