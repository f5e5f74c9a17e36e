#include "doctest.h"

#include "bcrb/errors.hpp"
#include "bcrb/imaging.hpp"
#include "support.hpp"

#include <cstdio>
#include <fstream>

using namespace bcrb;
using namespace bcrb::testing;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Vec vec3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

std::vector<double> log_range(double lo, double hi, int points) {
  std::vector<double> out;
  for (int k = 0; k < points; ++k) out.push_back(lo * std::pow(hi / lo, double(k) / (points - 1)));
  return out;
}

}  // namespace

TEST_CASE("PSF catalog is normalized") {
  for (const char* name : {"gaussian", "first-order-hermite"}) {
    auto psf = PointSpreadFunction::from_catalog(name, 1.3);
    double total = 0, h = 1e-3;
    for (double x = -20; x <= 20; x += h) total += psf.intensity(x) * h;
    CHECK(std::abs(total - 1) < 1e-8);
    // derivative against central differences
    for (double x : {-1.7, 0.2, 2.5})
      CHECK(std::abs(psf.derivative(x) - (psf.amplitude(x + 1e-6) - psf.amplitude(x - 1e-6)) / 2e-6) < 1e-8);
  }
  auto s = PointSpreadFunction::sinc(1.0);
  CHECK(std::abs(s.derivative(0.37) - (s.amplitude(0.37 + 1e-6) - s.amplitude(0.37 - 1e-6)) / 2e-6) < 1e-8);
  CHECK_THROWS_AS(PointSpreadFunction::from_catalog("airy"), InvalidArgument);
}

TEST_CASE("direct_imaging_fisher examples") {
  CHECK(std::abs(direct_imaging_fisher(PointSpreadFunction::gaussian(1.0), Vec::Zero(1))(0, 0) - 1) < 1e-4);
  CHECK(std::abs(direct_imaging_fisher(PointSpreadFunction::gaussian(2.0), Vec::Constant(1, 0.3))(0, 0) - 0.25) < 1e-4);
  CHECK(std::abs(direct_imaging_fisher(PointSpreadFunction::hermite1(1.0), Vec::Zero(1))(0, 0) - 0) > 0.1);

  auto psf = PointSpreadFunction::gaussian(1.0);
  const Mat f0 = direct_imaging_fisher(psf, Vec::Zero(2));
  Eigen::SelfAdjointEigenSolver<Mat> es(f0);
  CHECK(es.eigenvalues()[0] <= 1e-8 * es.eigenvalues()[1]);
  const Vec w = centroid_weights(2);
  const Vec top = es.eigenvectors().col(1);
  CHECK(std::acos(std::min(1.0, std::abs(top.dot(w.normalized())))) < 1e-4);
  const Vec v = vec2(0.8, -0.3);
  CHECK(std::abs(v.dot(f0 * v) - std::pow(v.dot(w), 2) * 1.0) < 1e-4);

  CHECK_THROWS_AS(direct_imaging_fisher(PointSpreadFunction::sinc(1.0), Vec::Zero(1)), RangeError);
  ImagingOptions narrow;
  narrow.span_sigmas = 2;
  CHECK_THROWS_AS(direct_imaging_fisher(psf, Vec::Zero(1), narrow), RangeError);
}

TEST_CASE("F(0) range is the centroid direction for three sources") {
  for (auto psf : {PointSpreadFunction::gaussian(1.0), PointSpreadFunction::hermite1(1.0)}) {
    const Mat f0 = direct_imaging_fisher(psf, Vec::Constant(3, 0.4));
    Eigen::SelfAdjointEigenSolver<Mat> es(f0);
    CHECK(es.eigenvalues()[1] <= 1e-8 * es.eigenvalues()[2]);
    const double angle = std::acos(std::min(1.0, std::abs(es.eigenvectors().col(2).dot(centroid_weights(3).normalized()))));
    CHECK(angle < 1e-4);
  }
}

TEST_CASE("exponent_fit") {
  const auto taus = log_range(1e-3, 1e-1, 9);
  auto g = exponent_fit(PointSpreadFunction::gaussian(1.0), Vec::Zero(2), vec2(1, -1), taus);
  CHECK(std::abs(g.m - 2) < 0.1);
  CHECK(g.warning.empty());
  // leading coefficient: F(tau) ~ tau^2 int (h'')^2 / h = 2 tau^2 / sigma^4
  CHECK(std::abs(g.samples.front().second / (taus.front() * taus.front()) - 2) < 1e-3);

  auto z = exponent_fit(PointSpreadFunction::hermite1(1.0), Vec::Zero(2), vec2(1, -1), taus);
  CHECK(std::abs(z.m - 1) < 0.15);

  auto c = exponent_fit(PointSpreadFunction::gaussian(1.0), Vec::Zero(2), centroid_weights(2), taus);
  CHECK(std::abs(c.m) < 0.05);

  CHECK_THROWS_AS(exponent_fit(PointSpreadFunction::gaussian(1.0), Vec::Zero(2), vec2(1, -1), {0.01, 0.05, 0.1}),
                  InvalidArgument);
}

TEST_CASE("directional_fisher_table interpolates the information") {
  auto psf = PointSpreadFunction::gaussian(1.0);
  auto table = directional_fisher_table(psf, Vec::Zero(2), vec2(1, -1), 1e-3, 10, 81);
  for (double t : {-2.3, -0.05, 0.0004, 0.01, 0.7, 4.0}) {
    const double exact = directional_fisher(psf, Vec::Zero(2), vec2(1, -1), t);
    CHECK(std::abs(table(t) - exact) <= 2e-3 * exact);
  }
}

TEST_CASE("minimax_rate") {
  const std::vector<double> ns{1e2, 1e3, 1e4, 1e5, 1e6};
  auto g = minimax_rate(PointSpreadFunction::gaussian(1.0), Vec::Zero(2), vec2(1, -1), ns);
  CHECK(std::abs(g.slope + 0.5) < 0.05);
  auto z = minimax_rate(PointSpreadFunction::hermite1(1.0), Vec::Zero(2), vec2(1, -1), ns);
  CHECK(std::abs(z.slope + 2.0 / 3) < 0.05);
  auto c = minimax_rate(PointSpreadFunction::gaussian(1.0), Vec::Zero(2), centroid_weights(2), ns);
  CHECK(std::abs(c.slope + 1) < 0.05);
}

TEST_CASE("imaging_helstrom") {
  auto psf = PointSpreadFunction::gaussian(1.0);
  auto one = imaging_helstrom(psf, Vec::Zero(1));
  CHECK(std::abs(one.k(0, 0) - 1) < 1e-4);
  auto one_wide = imaging_helstrom(PointSpreadFunction::gaussian(2.0), Vec::Constant(1, 1.0));
  CHECK(std::abs(one_wide.k(0, 0) - 0.25) < 1e-4);

  auto two = imaging_helstrom(psf, vec2(-0.25, 0.25));
  CHECK(two.rank == 2);
  CHECK(two.projection_error <= 1e-6);

  double previous = 1e300;
  for (double eps : {1.0, 0.5, 0.25, 0.125, 0.0625}) {
    auto r = imaging_helstrom(psf, vec3(-0.6 * eps, 0.1 * eps, 0.5 * eps));
    const double ratio = r.eigenvalues[2] / r.eigenvalues[1];
    CHECK(ratio < previous);
    previous = ratio;
  }
  CHECK(previous < 1e-3);
}

TEST_CASE("Helstrom information dominates direct imaging") {
  std::mt19937 rng(21);
  std::normal_distribution<double> normal;
  for (auto psf : {PointSpreadFunction::gaussian(1.0), PointSpreadFunction::hermite1(1.0)}) {
    for (int t = 0; t < 4; ++t) {
      const Vec theta = vec3(normal(rng), normal(rng), normal(rng)) * 0.5;
      const Mat f = direct_imaging_fisher(psf, theta);
      const Mat k = imaging_helstrom(psf, theta).k;
      for (int s = 0; s < 10; ++s) {
        const Vec v = vec3(normal(rng), normal(rng), normal(rng));
        CHECK(v.dot(k * v) >= v.dot(f * v) - 1e-8);
      }
    }
  }
}

TEST_CASE("shift and reflection invariance of the spectra") {
  auto psf = PointSpreadFunction::gaussian(1.0);
  const Vec theta = vec3(-0.4, 0.1, 0.7);
  auto spectrum = [](const Mat& m) { return Vec(Eigen::SelfAdjointEigenSolver<Mat>(m).eigenvalues()); };
  const Vec f = spectrum(direct_imaging_fisher(psf, theta));
  const Vec k = spectrum(imaging_helstrom(psf, theta).k);
  const Vec shifted = theta.array() + 2.75;
  CHECK((spectrum(direct_imaging_fisher(psf, shifted)) - f).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((spectrum(imaging_helstrom(psf, shifted).k) - k).cwiseAbs().maxCoeff() < 1e-8);
  const Vec reflected = -theta;
  CHECK((spectrum(direct_imaging_fisher(psf, reflected)) - f).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((spectrum(imaging_helstrom(psf, reflected).k) - k).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("quantum_vs_classical") {
  auto psf = PointSpreadFunction::gaussian(1.0);
  ParameterGrid grid({-3.0, -2.0}, {2.0, 3.0}, {21, 21});
  auto prior = [](const Vec& x) { return gauss_density(x[0] + 0.5, 0.25) * gauss_density(x[1] - 0.5, 0.25); };
  const Vec u = vec2(-1, 1);
  auto b = quantum_vs_classical(psf, grid, prior, u, 50);
  CHECK(b.q_max > 0);
  CHECK(b.q_max <= b.b_max + 1e-10);

  auto zero = quantum_vs_classical(psf, grid, prior, Vec::Zero(2), 50);
  CHECK(zero.q_max == 0.0);
  CHECK(zero.b_max == 0.0);

  auto equal = quantum_vs_classical(psf, grid, prior, u, 50, {}, true);
  CHECK(equal.q_max == equal.b_max);
}

TEST_CASE("PSF loaded from CSV") {
  const std::string path = "test_imaging_psf.csv";
  {
    auto g = PointSpreadFunction::gaussian(1.0);
    std::ofstream out(path);
    out.precision(17);
    out << "x,amplitude\n";
    for (int i = 0; i <= 4000; ++i) {
      const double x = -20 + i * 0.01;
      out << x << "," << 3.0 * g.amplitude(x) << "\n";
    }
  }
  auto psf = PointSpreadFunction::from_csv(path);
  std::remove(path.c_str());
  CHECK(std::abs(psf.amplitude(0.3) - PointSpreadFunction::gaussian(1.0).amplitude(0.3)) < 1e-7);
  ImagingOptions o;
  o.span_sigmas = 10;
  CHECK(std::abs(direct_imaging_fisher(psf, Vec::Zero(1), o)(0, 0) - 1) < 1e-4);
}
