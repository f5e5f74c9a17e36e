#pragma once

// Statistical models on a grid and their behaviour under reparametrization.
//
// Jacobian convention: J(a, b) = d theta~^b / d theta^a, evaluated at theta.
// With J~ = J^{-1}:
//   u~ = J~ u,   F~ = J~ F J~^T,   g~ = J~ g J~^T,   v~ = J^T v,
// and the density rho (with respect to sqrt|g| d^p theta) is a scalar.

#include "bcrb/grid_fields.hpp"

#include <functional>
#include <optional>
#include <string>

namespace bcrb {

/// Closed-form description of a model in its own coordinates.  Any member may
/// be empty; pushforward falls back to interpolating node values.
struct ModelFunctions {
  std::function<Mat(const Vec&)> fisher;
  std::function<Vec(const Vec&)> weight;
  std::function<Mat(const Vec&)> metric;
  /// Unnormalized density with respect to the volume element.
  std::function<double(const Vec&)> prior;
};

class StatisticalModel {
 public:
  StatisticalModel() = default;
  /// Validates shapes, PSD Fisher values, metric positivity and (when present)
  /// prior normalization to 1e-8.
  StatisticalModel(MatrixField fisher, VectorField weight, MatrixField metric,
                   std::optional<ScalarField> prior = std::nullopt);

  /// Samples the callbacks on `grid`.  The metric defaults to the identity and
  /// the sampled prior is normalized by the grid quadrature.
  static StatisticalModel from_functions(const ParameterGrid& grid, ModelFunctions functions);

  const ParameterGrid& grid() const { return fisher_.grid(); }
  int dim() const { return grid().dim(); }
  const MatrixField& fisher() const { return fisher_; }
  const VectorField& weight() const { return weight_; }
  const MatrixField& metric() const { return metric_; }
  bool has_prior() const { return prior_.has_value(); }
  /// Throws InvalidArgument when no prior is attached.
  const ScalarField& prior() const;
  /// Density with respect to d^p theta, pi = rho sqrt|g|.
  ScalarField prior_density() const;
  const std::optional<ModelFunctions>& functions() const { return functions_; }

  StatisticalModel with_prior(ScalarField prior) const;
  StatisticalModel with_fisher(MatrixField fisher) const;
  StatisticalModel with_weight(VectorField weight) const;

 private:
  MatrixField fisher_;
  VectorField weight_;
  MatrixField metric_;
  std::optional<ScalarField> prior_;
  std::optional<ModelFunctions> functions_;
};

/// rho / integrate(rho, metric).
ScalarField normalized(const ScalarField& rho, const MatrixField& metric);

struct Diffeomorphism {
  std::string name;
  std::function<Vec(const Vec&)> forward;
  std::function<Vec(const Vec&)> inverse;
  /// Optional analytic Jacobian J(a, b) = d theta~^b / d theta^a.
  std::function<Mat(const Vec&)> jacobian;

  /// Analytic Jacobian, or central differences with step `fd_step` per axis.
  Mat jacobian_at(const Vec& theta, const std::vector<double>& fd_step) const;
};

namespace maps {
Diffeomorphism identity();
/// theta~ = scale .* theta + shift (axis-wise).
Diffeomorphism affine(const Vec& scale, const Vec& shift);
/// theta~ = theta^power on every axis; power must be an odd positive integer.
Diffeomorphism odd_power(int power);
/// theta~ = 1 / (1 + exp(-(theta - center) / width)) on every axis.
Diffeomorphism logistic(double center, double width);
/// theta~ = A theta with an invertible constant matrix.
Diffeomorphism linear(const Mat& a);
}  // namespace maps

/// Image of the box under an axis-wise monotone map with the same node counts.
ParameterGrid image_grid(const ParameterGrid& source, const Diffeomorphism& map);

/// Checks |J| != 0 and forward/inverse round trip (1e-8) at every node of
/// `source`.  Throws SingularError / InvalidArgument naming the node.
void validate_map(const ParameterGrid& source, const Diffeomorphism& map);

struct PushforwardResult {
  StatisticalModel model;
  /// Factor applied to the transported prior to restore unit mass on the new grid.
  double prior_renormalization = 1.0;
  /// True when some field had to be interpolated instead of evaluated.
  bool interpolated = false;
};

/// Model expressed in theta~ coordinates on `target` (defaults to image_grid).
PushforwardResult pushforward_model(const StatisticalModel& model, const Diffeomorphism& map,
                                    std::optional<ParameterGrid> target = std::nullopt);

/// v~^b(theta~) = v^a(theta) J(a, b) at theta = theta(theta~).  Node values of
/// `v` are interpolated; pass a callback for exact evaluation.
VectorField transform_vector_field(const VectorField& v, const Diffeomorphism& map,
                                   const ParameterGrid& target);
VectorField transform_vector_field(const std::function<Vec(const Vec&)>& v,
                                   const ParameterGrid& source, const Diffeomorphism& map,
                                   const ParameterGrid& target);

struct InvarianceReport {
  std::string map_name;
  double bound_source = 0.0;
  double bound_target = 0.0;
  double relative_difference = 0.0;
  double tolerance = 1e-6;
  bool transformed_v = true;
  bool invariant = false;
  double a_source = 0, f_source = 0, p_source = 0;
  double a_target = 0, f_target = 0, p_target = 0;
};

/// Gill-Levit bound of `v` in both coordinate systems.  With
/// `transform_v = false` the target uses the same component values (the
/// non-invariant control).
InvarianceReport invariance_report(const StatisticalModel& model,
                                   const std::function<Vec(const Vec&)>& v,
                                   const Diffeomorphism& map, double n, bool transform_v = true,
                                   double tolerance = 1e-6);

}  // namespace bcrb
