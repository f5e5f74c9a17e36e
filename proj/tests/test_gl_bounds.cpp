#include "doctest.h"

#include "bcrb/errors.hpp"
#include "bcrb/gl_bounds.hpp"
#include "support.hpp"

using namespace bcrb;
using namespace bcrb::testing;

namespace {

VectorField constant_v(const StatisticalModel& m, double c) {
  return VectorField::constant(m.grid(), Vec::Constant(m.dim(), c), Variance::contravariant);
}

}  // namespace

TEST_CASE("functionals: Gaussian oracle A = F = P = 1") {
  auto model = gaussian_model_1d(-8, 8, 8001);
  auto f = functionals(model, constant_v(model, 1.0));
  CHECK(std::abs(f.A - 1.0) < 1e-6);
  CHECK(std::abs(f.F - 1.0) < 1e-6);
  CHECK(std::abs(f.P - 1.0) < 1e-6);

  auto zero = functionals(model, constant_v(model, 0.0));
  CHECK(zero.A == 0.0);
  CHECK(zero.F == 0.0);
  CHECK(zero.P == 0.0);
}

TEST_CASE("functionals: prior variance enters P as 1/s^2") {
  auto model = gaussian_model_1d(-12, 12, 12001, 1.0, 1.0, 2.0);
  CHECK(std::abs(functionals(model, constant_v(model, 1.0)).P - 0.5) < 1e-6);
}

TEST_CASE("functionals: zero information keeps a positive prior term") {
  auto grid = ParameterGrid::line(-1, 1, 401);
  ModelFunctions fn;
  fn.fisher = [](const Vec&) { return Mat(Mat::Zero(1, 1)); };
  fn.weight = [](const Vec&) { return Vec(Vec::Ones(1)); };
  fn.prior = [](const Vec&) { return 1.0; };
  auto model = StatisticalModel::from_functions(grid, fn);
  auto v = VectorField::from_function(
      grid, [](const Vec& x) { return Vec(Vec::Constant(1, std::pow(1 - x[0] * x[0], 2))); },
      Variance::contravariant);
  auto f = functionals(model, v);
  CHECK(f.F == 0.0);
  CHECK(f.P > 0.0);
  // rho = 1/2, v = (1 - x^2)^2: <P> = (1/2) int 16 x^2 (1 - x^2)^2 dx = 128/105
  CHECK(f.P == doctest::Approx(0.5 * 256.0 / 105.0).epsilon(1e-4));
}

TEST_CASE("functionals: boundary-vanishing violation is an error") {
  auto grid = ParameterGrid::line(-1, 1, 101);
  ModelFunctions fn;
  fn.fisher = [](const Vec&) { return Mat(Mat::Ones(1, 1)); };
  fn.weight = [](const Vec&) { return Vec(Vec::Ones(1)); };
  fn.prior = [](const Vec&) { return 1.0; };
  auto model = StatisticalModel::from_functions(grid, fn);
  CHECK_THROWS_AS(functionals(model, constant_v(model, 1.0)), BoundaryError);
}

TEST_CASE("gill_levit_bound examples") {
  auto model = gaussian_model_1d(-8, 8, 8001);
  auto r = gill_levit_bound(model, constant_v(model, 1.0), 10);
  CHECK(std::abs(r.B - 1.0 / 11.0) < 1e-6);
  CHECK(r.B == r.A * r.A / (r.n * r.F + r.P));

  auto prior_only = gill_levit_bound(model, constant_v(model, 1.0), 0);
  CHECK(std::abs(prior_only.B - 1.0) < 1e-6);

  auto no_u = gaussian_model_1d(-8, 8, 2001, 1.0, 0.0);
  CHECK(gill_levit_bound(no_u, constant_v(no_u, 1.0), 10).B == 0.0);

  CHECK_THROWS_AS(gill_levit_bound(model, constant_v(model, 0.0), 10), SingularError);
}

TEST_CASE("gill_levit_bound is invariant to rescaling v and nonnegative") {
  auto model = gaussian_model_1d(-6, 6, 3001);
  RandomField rf(model.grid(), 7);
  for (int t = 0; t < 10; ++t) {
    auto fn = rf.next();
    auto v = VectorField::from_function(model.grid(), fn, Variance::contravariant);
    auto scaled = VectorField(model.grid(), -3.7 * v.values(), Variance::contravariant);
    const double b1 = gill_levit_bound(model, v, 5).B;
    const double b2 = gill_levit_bound(model, scaled, 5).B;
    CHECK(b1 >= 0.0);
    CHECK(std::abs(b1 - b2) <= 1e-10 * b1);
  }
}

TEST_CASE("natural_v") {
  auto model = gaussian_model_1d(-8, 8, 2001);
  auto v = natural_v(model);
  CHECK((v.values().array() - 1.0).abs().maxCoeff() < 1e-14);

  Mat f = Mat::Zero(2, 2);
  f(0, 0) = 1;
  f(1, 1) = 4;
  auto m2 = gaussian_model_2d(7, 71, f, Vec::Ones(2));
  auto v2 = natural_v(m2);
  CHECK(v2.at(100)[0] == doctest::Approx(1.0));
  CHECK(v2.at(100)[1] == doctest::Approx(0.25));
  auto r = natural_bound(m2, 3);
  CHECK(std::abs(r.A - 1.25) < 1e-9);
  CHECK(std::abs(r.F - 1.25) < 1e-9);

  Mat rank1 = Mat::Ones(2, 2);
  auto singular = gaussian_model_2d(7, 41, rank1, Vec::Ones(2));
  CHECK_THROWS_AS(natural_v(singular), SingularError);
}

TEST_CASE("van_trees_v examples") {
  auto model = gaussian_model_1d(-8, 8, 2001);
  auto vt = van_trees_v(model, 10);
  CHECK(std::abs(vt.report.B - 1.0 / 11.0) < 1e-6);
  CHECK_FALSE(vt.report.contravariant);
  CHECK(std::abs(vt.mean_prior_information(0, 0) - 1.0) < 1e-6);

  auto no_u = gaussian_model_1d(-8, 8, 2001, 1.0, 0.0);
  auto vt0 = van_trees_v(no_u, 10);
  CHECK(vt0.report.B == 0.0);
  CHECK(vt0.v.values().cwiseAbs().maxCoeff() == 0.0);

  Mat f = 2.0 * Mat::Identity(2, 2);
  Vec u(2);
  u << 1, 0;
  auto m2 = gaussian_model_2d(8, 161, f, u);
  CHECK(std::abs(van_trees_v(m2, 1).report.B - 1.0 / 3.0) < 1e-6);
}

TEST_CASE("van_trees_v needs a strictly positive prior") {
  auto grid = ParameterGrid::line(-1, 1, 101);
  ModelFunctions fn;
  fn.fisher = [](const Vec&) { return Mat(Mat::Ones(1, 1)); };
  fn.weight = [](const Vec&) { return Vec(Vec::Ones(1)); };
  fn.prior = [](const Vec& x) { return 1 - x[0] * x[0]; };
  auto model = StatisticalModel::from_functions(grid, fn);
  CHECK_THROWS_AS(van_trees_v(model, 1), InvalidArgument);
}

TEST_CASE("vectoral_bound reductions") {
  auto model = gaussian_model_1d(-6, 6, 3001, 2.0);
  RandomField rf(model.grid(), 11);
  auto v = VectorField::from_function(model.grid(), rf.next(), Variance::contravariant);
  VectoralWeight w{MatrixField::identity(model.grid()), {model.weight()}, {v}};
  auto scalar = gill_levit_bound(model, v, 4);
  auto vec = vectoral_bound(model, w, 4);
  CHECK(std::abs(vec.B - scalar.B) <= 1e-12 * scalar.B);

  w.gamma = MatrixField::constant(model.grid(), 2.0 * Mat::Identity(1, 1));
  auto doubled = vectoral_bound(model, w, 4);
  CHECK(doubled.A == doctest::Approx(scalar.A));
  CHECK(doubled.F == doctest::Approx(scalar.F / 2));
  CHECK(doubled.P == doctest::Approx(scalar.P / 2));
  CHECK(doubled.B == doctest::Approx(2 * scalar.B).epsilon(1e-12));

  w.gamma = MatrixField::constant(model.grid(), -Mat::Identity(1, 1));
  CHECK_THROWS_AS(vectoral_bound(model, w, 4), InvalidArgument);
}

TEST_CASE("vectoral_bound: decoupled 2D problem sums the scalar A values") {
  Mat f = Mat::Identity(2, 2);
  auto m2 = gaussian_model_2d(7, 141, f, Vec::Zero(2));
  const auto& g = m2.grid();
  Vec e0 = Vec::Unit(2, 0), e1 = Vec::Unit(2, 1);
  VectoralWeight w{MatrixField::identity(g),
                   {VectorField::constant(g, e0, Variance::covariant),
                    VectorField::constant(g, 3.0 * e1, Variance::covariant)},
                   {VectorField::constant(g, e0, Variance::contravariant),
                    VectorField::constant(g, e1, Variance::contravariant)}};
  auto r = vectoral_bound(m2, w, 2);
  CHECK(std::abs(r.A - 4.0) < 1e-8);
  CHECK(std::abs(r.F - 2.0) < 1e-8);
  CHECK(std::abs(r.P - 2.0) < 5e-3);  // second-order cell scheme, h = 0.1
}

TEST_CASE("BoundReport CSV row") {
  BoundReport r;
  r.n = 10;
  r.A = r.F = r.P = 1;
  r.B = 1.0 / 11;
  r.v_choice = "natural";
  CHECK(BoundReport::csv_header() == "n,A,F,P,B,v_choice,residual");
  CHECK(r.csv_row() ==
        "1.000000000000e+01,1.000000000000e+00,1.000000000000e+00,1.000000000000e+00,"
        "9.090909090909e-02,natural,0.000000000000e+00");
}
