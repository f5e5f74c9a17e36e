#pragma once

// One-dimensional incoherent imaging of p equally bright point sources:
// direct-imaging Fisher information, the Helstrom information of the
// one-photon state rho = (1/p) sum_a |Psi_a><Psi_a|, exponent fits of the
// information along a direction and the resulting minimax rates.

#include "bcrb/grid_fields.hpp"
#include "bcrb/model_geometry.hpp"
#include "bcrb/quantum_info.hpp"
#include "bcrb/wave_minimax.hpp"

#include <functional>
#include <string>
#include <vector>

namespace bcrb {

struct PointSpreadFunction {
  std::string name;
  double sigma = 1.0;
  /// Real amplitude Psi(x) and its derivative; h = Psi^2 integrates to 1.
  std::function<double(double)> amplitude;
  std::function<double(double)> derivative;
  /// Zeros of Psi (used as quadrature breakpoints).
  std::vector<double> zeros;

  double intensity(double x) const {
    const double a = amplitude(x);
    return a * a;
  }

  static PointSpreadFunction gaussian(double sigma = 1.0);
  /// (x / sigma) times the Gaussian amplitude: zero at the origin.
  static PointSpreadFunction hermite1(double sigma = 1.0);
  /// sin(pi x / sigma) / (pi x / sigma) / sqrt(sigma); zeros at multiples of sigma.
  static PointSpreadFunction sinc(double sigma = 1.0, int listed_zeros = 64);
  /// "gaussian", "first-order-hermite" or "sinc".
  static PointSpreadFunction from_catalog(const std::string& name, double sigma = 1.0);
  /// Uniformly sampled (x, amplitude) CSV, cubic B-spline interpolated and
  /// rescaled to unit intensity; zero outside the sampled range.
  static PointSpreadFunction from_csv(const std::string& path, double sigma = 1.0);
};

struct ImagingOptions {
  /// Image-plane span beyond the extreme sources, in units of sigma.
  double span_sigmas = 12.0;
  /// Image-plane nodes (quadrature panels for F, samples for K).
  int nodes = 4096;
  /// Hilbert-space dimension for the Helstrom computation.
  int basis_size = 20;
  /// Fisher integrand is dropped where f falls below this.
  double intensity_floor = 1e-14;
};

/// f(x) = (1/p) sum_a h(x - theta_a) and F_ab = int d_a f d_b f / f dx.
Mat direct_imaging_fisher(const PointSpreadFunction& psf, const Vec& theta,
                          const ImagingOptions& options = {});

/// Centroid weights w_a = 1/p.
Vec centroid_weights(int p);

struct ExponentFit {
  double m = 0.0;
  double amplitude = 0.0;
  double r_squared = 0.0;
  /// (tau, F(tau)) samples used in the fit.
  std::vector<std::pair<double, double>> samples;
  /// Non-empty when R^2 < 0.99.
  std::string warning;
};

/// Directional information F(tau) = v F(theta0 + v tau) v.
double directional_fisher(const PointSpreadFunction& psf, const Vec& theta0, const Vec& v, double tau,
                          const ImagingOptions& options = {});

/// Least-squares fit of log F(tau) = log A + m log tau over tau_list (> 0, >= 2 decades).
ExponentFit exponent_fit(const PointSpreadFunction& psf, const Vec& theta0, const Vec& v,
                         const std::vector<double>& tau_list, const ImagingOptions& options = {});

/// F(tau) tabulated on a log grid and interpolated log-log, power-law extrapolated
/// below the table and held constant beyond it.
std::function<double(double)> directional_fisher_table(const PointSpreadFunction& psf,
                                                       const Vec& theta0, const Vec& v,
                                                       double tau_min, double tau_max, int points,
                                                       const ImagingOptions& options = {});

/// rate_fit of the 1D submodel theta(tau) = theta0 + v tau.
RateFit minimax_rate(const PointSpreadFunction& psf, const Vec& theta0, const Vec& v,
                     const std::vector<double>& n_list, const ImagingOptions& options = {});

struct HelstromReport {
  Mat k;
  /// Eigenvalues of K, descending.
  Vec eigenvalues;
  int rank = 0;
  /// Largest relative norm deficit of Psi_a, Psi_a' in the truncated basis.
  double projection_error = 0.0;
  int basis_dim = 0;
};

/// Helstrom information of the imaging state, computed in an orthonormalized
/// basis spanned by displaced amplitudes, their derivatives and Hermite-Gauss
/// padding modes.  Rank at threshold 1e-6 lambda_max.
HelstromReport imaging_helstrom(const PointSpreadFunction& psf, const Vec& theta,
                                const ImagingOptions& options = {});

struct ImagingBounds {
  double b_max = 0.0;
  double q_max = 0.0;
  MatrixField fisher;
  MatrixField helstrom;
};

/// B_max and Q_max on a theta-grid with prior density `prior` (normalized on the
/// grid) and constant weight u.  `force_equal` uses F in place of K.
ImagingBounds quantum_vs_classical(const PointSpreadFunction& psf, const ParameterGrid& grid,
                                   const std::function<double(const Vec&)>& prior, const Vec& u,
                                   double n, const ImagingOptions& options = {},
                                   bool force_equal = false);

}  // namespace bcrb
