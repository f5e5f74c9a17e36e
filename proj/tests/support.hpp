#pragma once

// Shared fixtures for the unit and acceptance tests.

#include "bcrb/grid_fields.hpp"
#include "bcrb/model_geometry.hpp"

#include <cmath>
#include <random>

namespace bcrb::testing {

inline double gauss_density(double x, double s2 = 1.0) {
  return std::exp(-x * x / (2 * s2)) / std::sqrt(2 * M_PI * s2);
}

/// 1D model with constant Fisher information f0, u = u0 and a N(0, s2) prior.
inline StatisticalModel gaussian_model_1d(double lo, double hi, int nodes, double f0 = 1.0,
                                          double u0 = 1.0, double s2 = 1.0) {
  auto grid = ParameterGrid::line(lo, hi, nodes);
  ModelFunctions fn;
  fn.fisher = [=](const Vec&) { return Mat(Mat::Constant(1, 1, f0)); };
  fn.weight = [=](const Vec&) { return Vec(Vec::Constant(1, u0)); };
  fn.prior = [=](const Vec& x) { return gauss_density(x[0], s2); };
  return StatisticalModel::from_functions(grid, fn);
}

/// 2D model with constant Fisher matrix, constant u and an isotropic N(0, s2 I) prior.
inline StatisticalModel gaussian_model_2d(double half_width, int nodes, const Mat& f,
                                          const Vec& u, double s2 = 1.0) {
  ParameterGrid grid({-half_width, -half_width}, {half_width, half_width}, {nodes, nodes});
  ModelFunctions fn;
  fn.fisher = [=](const Vec&) { return f; };
  fn.weight = [=](const Vec&) { return u; };
  fn.prior = [=](const Vec& x) { return gauss_density(x[0], s2) * gauss_density(x[1], s2); };
  return StatisticalModel::from_functions(grid, fn);
}

/// Gaussian profile multiplied by a squared polynomial bump vanishing at the box ends.
inline double bump_gaussian(double x, double lo, double hi, double center, double width) {
  const double b = (x - lo) * (hi - x);
  if (b <= 0) return 0.0;
  const double z = (x - center) / width;
  return b * b * std::exp(-0.5 * z * z);
}

/// Smooth random contravariant field tapered by a bump so that rho v vanishes
/// on the boundary: polynomial of low degree times prod_a (x_a - lo_a)(hi_a - x_a).
class RandomField {
 public:
  RandomField(const ParameterGrid& grid, unsigned seed, int degree = 3)
      : grid_(grid), rng_(seed), degree_(degree) {}

  std::function<Vec(const Vec&)> next() {
    std::normal_distribution<double> normal;
    const int p = grid_.dim();
    Mat coeff(p, (degree_ + 1) * p);
    for (Index i = 0; i < coeff.size(); ++i) coeff.data()[i] = normal(rng_);
    const ParameterGrid grid = grid_;
    const int degree = degree_;
    return [=](const Vec& x) {
      double taper = 1.0;
      Vec basis((degree + 1) * p);
      for (int a = 0; a < p; ++a) {
        const double lo = grid.lower(a), hi = grid.upper(a);
        const double t = (2 * x[a] - lo - hi) / (hi - lo);
        taper *= std::max(0.0, (x[a] - lo) * (hi - x[a])) / ((hi - lo) * (hi - lo));
        double power = 1.0;
        for (int k = 0; k <= degree; ++k) {
          basis[a * (degree + 1) + k] = power;
          power *= t;
        }
      }
      return Vec(taper * (coeff * basis));
    };
  }

 private:
  ParameterGrid grid_;
  std::mt19937 rng_;
  int degree_;
};

}  // namespace bcrb::testing
