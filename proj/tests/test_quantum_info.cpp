#include "doctest.h"

#include "bcrb/errors.hpp"
#include "bcrb/quantum_info.hpp"
#include "support.hpp"

using namespace bcrb;
using namespace bcrb::testing;

namespace {

DensityFamily qubit_diag() {
  return DensityFamily(2, 1, [](const Vec& t) {
    CMat r = CMat::Zero(2, 2);
    r(0, 0) = (1 + t[0]) / 2;
    r(1, 1) = (1 - t[0]) / 2;
    return r;
  });
}

DensityFamily pure_rotation() {
  auto state = [](const Vec& t) {
    Eigen::VectorXcd psi(2);
    psi << std::cos(t[0]), Complex(0, 1) * std::sin(t[0]);
    return psi;
  };
  return DensityFamily(
      2, 1, [=](const Vec& t) { return CMat(state(t) * state(t).adjoint()); },
      [=](const Vec& t) {
        Eigen::VectorXcd dpsi(2);
        dpsi << -std::sin(t[0]), Complex(0, 1) * std::cos(t[0]);
        const Eigen::VectorXcd psi = state(t);
        return std::vector<CMat>{dpsi * psi.adjoint() + psi * dpsi.adjoint()};
      });
}

// Mixed qutrit with two parameters: a rotated, noisy state.
DensityFamily qutrit() {
  return DensityFamily(3, 2, [](const Vec& t) {
    Eigen::VectorXcd psi(3);
    psi << std::cos(t[0]), std::sin(t[0]) * std::exp(Complex(0, t[1])), 0.3;
    psi.normalize();
    CMat r = 0.8 * psi * psi.adjoint() + 0.2 / 3 * CMat::Identity(3, 3);
    return r;
  });
}

CMat random_hermitian(int d, std::mt19937& rng) {
  std::normal_distribution<double> normal;
  CMat m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = Complex(normal(rng), normal(rng));
  return 0.5 * (m + m.adjoint());
}

Mat random_psd(int d, std::mt19937& rng) {
  std::normal_distribution<double> normal;
  Mat m(d, d);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m * m.transpose();
}

}  // namespace

TEST_CASE("sld_scores examples") {
  const double t = 0.6;
  auto s = sld_scores(qubit_diag(), Vec::Constant(1, t));
  REQUIRE(s.size() == 1);
  CHECK(std::abs(s[0](0, 0) - 1 / (1 + t)) < 1e-9);
  CHECK(std::abs(s[0](1, 1) + 1 / (1 - t)) < 1e-9);
  CHECK(std::abs(s[0](0, 1)) < 1e-12);

  DensityFamily constant(2, 2, [](const Vec&) { return CMat(0.5 * CMat::Identity(2, 2)); });
  for (const auto& m : sld_scores(constant, Vec::Zero(2))) CHECK(m.cwiseAbs().maxCoeff() == 0.0);

  auto pure = pure_rotation();
  const Vec th = Vec::Constant(1, 0.4);
  auto sp = sld_scores(pure, th);
  const CMat r = pure.rho(th), d = pure.derivatives(th)[0];
  CHECK((0.5 * (r * sp[0] + sp[0] * r) - d).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((sp[0] - 2 * d).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("sld_scores rejects derivatives leaving the support") {
  // rho = diag(1, 0, 0) with a derivative inside the null block.
  DensityFamily bad(
      3, 1,
      [](const Vec&) {
        CMat r = CMat::Zero(3, 3);
        r(0, 0) = 1;
        return r;
      },
      [](const Vec&) {
        CMat d = CMat::Zero(3, 3);
        d(1, 1) = 1;
        d(2, 2) = -1;
        return std::vector<CMat>{d};
      });
  CHECK_THROWS_AS(sld_scores(bad, Vec::Zero(1)), SingularError);
}

TEST_CASE("helstrom_matrix examples") {
  CHECK(helstrom_matrix(qubit_diag(), Vec::Zero(1))(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(helstrom_matrix(qubit_diag(), Vec::Constant(1, 0.6))(0, 0) - 1.5625) < 1e-8);
  DensityFamily constant(2, 1, [](const Vec&) { return CMat(0.5 * CMat::Identity(2, 2)); });
  CHECK(helstrom_matrix(constant, Vec::Zero(1))(0, 0) == 0.0);
  // pure states: K = 4 (<dpsi|dpsi> - |<psi|dpsi>|^2) = 4
  CHECK(std::abs(helstrom_matrix(pure_rotation(), Vec::Constant(1, 0.4))(0, 0) - 4) < 1e-8);
}

TEST_CASE("Helstrom matrix is PSD and unitarily invariant") {
  auto fam = qutrit();
  std::mt19937 rng(2);
  std::normal_distribution<double> normal;
  CMat z(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) z(i, j) = Complex(normal(rng), normal(rng));
  const CMat u = Eigen::HouseholderQR<CMat>(z).householderQ();
  auto rotated = fam.conjugated(u);
  for (double a : {0.1, 0.7, 1.3}) {
    Vec th(2);
    th << a, 0.5 * a;
    const Mat k = helstrom_matrix(fam, th);
    CHECK((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(Eigen::SelfAdjointEigenSolver<Mat>(k).eigenvalues().minCoeff() >= -1e-12);
    CHECK((helstrom_matrix(rotated, th) - k).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("commuting families reduce to the classical Fisher information") {
  auto probs = [](const Vec& t) {
    Vec w(3);
    w << 1.0, std::exp(t[0]), std::exp(t[1] - t[0]);
    return Vec(w / w.sum());
  };
  DensityFamily diag(3, 2, [=](const Vec& t) { return CMat(probs(t).cast<Complex>().asDiagonal()); });
  Vec th(2);
  th << 0.3, -0.4;
  // classical Fisher information from finite differences of the distribution
  const double h = 1e-6;
  Mat dp(3, 2);
  for (int a = 0; a < 2; ++a) {
    Vec plus = th, minus = th;
    plus[a] += h;
    minus[a] -= h;
    dp.col(a) = (probs(plus) - probs(minus)) / (2 * h);
  }
  const Vec p = probs(th);
  const Mat fisher = dp.transpose() * p.cwiseInverse().asDiagonal() * dp;
  CHECK((helstrom_matrix(diag, th) - fisher).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("snr_observable") {
  auto fam = qutrit();
  Vec th(2);
  th << 0.5, 0.2;
  const Mat k = helstrom_matrix(fam, th);
  const auto s = sld_scores(fam, th);
  Vec v(2);
  v << 0.7, -1.2;
  const double vkv = v.dot(k * v);
  const CMat best = v[0] * s[0] + v[1] * s[1];
  CHECK(std::abs(snr_observable(fam, th, v, best) - vkv) < 1e-8 * std::max(1.0, vkv));
  CHECK(snr_observable(fam, th, v, CMat::Identity(3, 3)) == 0.0);

  std::mt19937 rng(9);
  const Vec t1 = Vec::Constant(1, 0.3);
  const double kq = helstrom_matrix(qubit_diag(), t1)(0, 0);
  for (int t = 0; t < 100; ++t) {
    CHECK(snr_observable(qubit_diag(), t1, Vec::Ones(1), random_hermitian(2, rng)) <= kq + 1e-8);
    CHECK(snr_observable(fam, th, v, random_hermitian(3, rng)) <= vkv + 1e-8);
  }

  CMat projector = CMat::Zero(2, 2);
  projector(0, 0) = 1;
  auto pure = pure_rotation();
  CHECK_THROWS_AS(snr_observable(pure, Vec::Zero(1), Vec::Ones(1), projector), InvalidArgument);
}

TEST_CASE("qmax") {
  auto model = gaussian_model_1d(-7, 7, 1401, 2.0);
  const auto& g = model.grid();
  auto k = MatrixField::constant(g, Mat::Constant(1, 1, 2.0));
  auto q = qmax(model, k, 1.0);
  CHECK(std::abs(q.quantum.report.B - 1.0 / 3) < 1e-5);

  auto same = qmax(model, k, 1.0, k);
  CHECK(same.quantum.report.B == same.classical->report.B);

  auto f = MatrixField::from_function(g, [](const Vec& x) {
    return Mat(Mat::Constant(1, 1, 1.0 + std::sin(x[0]) * std::sin(x[0])));
  });
  auto k2 = MatrixField::constant(g, Mat::Constant(1, 1, 2.0));
  auto ordered = qmax(model, k2, 3.0, f);
  CHECK(ordered.quantum.report.B <= ordered.classical->report.B + 1e-10);
  CHECK_THROWS_AS(qmax(model, f, 3.0, k2), InvalidArgument);
}

TEST_CASE("gaussian_shift_bounds") {
  Mat one = Mat::Ones(1, 1);
  auto b = gaussian_shift_bounds(2 * one, one, Vec::Ones(1));
  CHECK(b.q_max == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(b.achieved_risk == doctest::Approx(0.5).epsilon(1e-12));

  auto big = gaussian_shift_bounds(2 * one, 1e6 * one, Vec::Ones(1));
  CHECK(std::abs(big.q_max - 1e-6) < 1e-11);
  CHECK(std::abs(big.achieved_risk - 1e-6) < 1e-11);

  auto zero = gaussian_shift_bounds(2 * one, one, Vec::Zero(1));
  CHECK(zero.q_max == 0.0);
  CHECK(zero.achieved_risk == 0.0);

  CHECK_THROWS_AS(gaussian_shift_bounds(Mat::Zero(1, 1), Mat::Zero(1, 1), Vec::Ones(1)), SingularError);

  std::mt19937 rng(17);
  std::normal_distribution<double> normal;
  for (int t = 0; t < 100; ++t) {
    const int m = 1 + t % 3;
    const Mat k = random_psd(2 * m, rng), gm = random_psd(2 * m, rng) + 0.1 * Mat::Identity(2 * m, 2 * m);
    Vec u(2 * m);
    for (Index i = 0; i < u.size(); ++i) u[i] = normal(rng);
    auto r = gaussian_shift_bounds(k, gm, u);
    CHECK(r.q_max <= r.achieved_risk + 1e-12);
    CHECK(r.achieved_risk <= 2 * r.q_max + 1e-12);
  }
}
