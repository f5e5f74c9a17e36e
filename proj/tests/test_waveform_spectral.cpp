#include "doctest.h"

#include "bcrb/errors.hpp"
#include "bcrb/waveform_spectral.hpp"

#include <Eigen/Cholesky>

#include <cstdio>
#include <fstream>
#include <limits>
#include <random>

using namespace bcrb;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

// |h|^2 = 1, 4 S_q = 3, S_theta = 1 on |w| <= 2 pi and 0 outside.
SpectralModel rectangle() {
  SpectralModel s;
  s.omega = SpectralModel::symmetric_grid(4 * M_PI, 801);
  s.s_q = [](double) { return 0.75; };
  s.s_theta = [](double w) { return std::abs(w) <= 2 * M_PI ? 1.0 : 0.0; };
  return s;
}

SpectralModel smooth() {
  SpectralModel s;
  s.omega = SpectralModel::symmetric_grid(40, 2001);
  s.s_q = [](double w) { return 0.5 / (1 + w * w); };
  s.s_theta = [](double w) { return 2.0 * std::exp(-w * w / 8); };
  return s;
}

// Quantum-limited linear measurement: |h_X|^2 / S_Z = 4 S_q / hbar^2.
void quantum_limited(SpectralModel& s, double scale = 1.0) {
  auto sq = s.s_q;
  const double hbar = s.hbar;
  s.hx2 = [](double w) { return 2.0 + std::cos(w) * 0 + 0 * w; };
  s.s_z = [=](double w) { return scale * 2.0 * hbar * hbar / (4 * sq(w)); };
}

}  // namespace

TEST_CASE("continuum_qmax examples") {
  CHECK(std::abs(continuum_qmax(rectangle()) - 0.5) < 1e-9);

  auto perfect = rectangle();
  perfect.s_q = [](double) { return kInf; };
  CHECK(continuum_qmax(perfect) == 0.0);

  auto no_prior = rectangle();
  no_prior.s_theta = [](double) { return 0.0; };
  CHECK(continuum_qmax(no_prior) == 0.0);

  auto narrow = smooth();
  narrow.omega = SpectralModel::symmetric_grid(4, 201);
  CHECK_THROWS_AS(continuum_qmax(narrow), RangeError);

  auto bad = smooth();
  bad.s_q = [](double w) { return w > 1 ? 1.0 : 0.5; };
  CHECK_THROWS_AS(continuum_qmax(bad), InvalidArgument);
}

TEST_CASE("build_circulant_bound examples") {
  auto s = rectangle();
  const double dt = 0.25;
  for (int p : {256, 2048}) {
    auto d = TimeDiscretization::instant(p * dt, p);
    // 2T + 1 frequencies inside the rectangle, each contributing 1 / (4T)
    CHECK(build_circulant_bound(d, s) == doctest::Approx(0.5 + 1.0 / (4 * p * dt)).epsilon(1e-12));
  }
  CHECK(std::abs(build_circulant_bound(TimeDiscretization::instant(512, 2048), s) - 0.5) < 5e-3);

  auto zero_prior = s;
  zero_prior.s_theta = [](double) { return 0.0; };
  CHECK(build_circulant_bound(TimeDiscretization::instant(64, 256), zero_prior) == 0.0);

  TimeDiscretization none{64, 256, Vec::Zero(256)};
  CHECK(build_circulant_bound(none, s) == 0.0);

  auto degenerate = s;
  degenerate.s_q = [](double) { return 0.0; };
  degenerate.s_theta = [](double) { return kInf; };
  CHECK_THROWS_AS(build_circulant_bound(TimeDiscretization::instant(64, 256), degenerate), SingularError);
}

TEST_CASE("circulant bound equals the dense u^T (K+G)^{-1} u") {
  auto s = smooth();
  TimeDiscretization d{8.0, 32, Vec(32)};
  std::mt19937 rng(4);
  std::normal_distribution<double> normal;
  for (Index a = 0; a < d.h.size(); ++a) d.h[a] = normal(rng);
  auto [k, g] = circulant_matrices(d, s);
  const Vec u = d.h * d.dt();
  const double dense = u.dot((k + g).ldlt().solve(u));
  CHECK(build_circulant_bound(d, s) == doctest::Approx(dense).epsilon(1e-8));
}

TEST_CASE("circulant bound converges to the continuum") {
  auto rect = rectangle();
  const double exact = continuum_qmax(rect);
  double previous = kInf;
  for (int p : {128, 256, 512, 1024, 2048, 4096}) {
    const double err = std::abs(build_circulant_bound(TimeDiscretization::instant(p * 0.25, p), rect) - exact);
    CHECK(err < previous);
    previous = err;
  }
  CHECK(previous < 1e-2 * exact);

  auto s = smooth();
  const double target = continuum_qmax(s);

  // instant weights: the value does not depend on T or on the slot
  const double a = build_circulant_bound(TimeDiscretization::instant(400, 8000, 17), s);
  const double b = build_circulant_bound(TimeDiscretization::instant(800, 16000, 5000), s);
  CHECK(std::abs(a - target) < 1e-2 * target);
  CHECK(std::abs(b - target) < 1e-2 * target);
}

TEST_CASE("wiener_risk examples") {
  auto s = rectangle();
  quantum_limited(s);
  CHECK(wiener_risk(s) == doctest::Approx(continuum_qmax(s)).epsilon(1e-12));

  auto worse = rectangle();
  quantum_limited(worse, 2.0);
  CHECK(wiener_risk(worse) > continuum_qmax(worse));

  auto blind = rectangle();
  blind.hx2 = [](double) { return 1.0; };
  blind.s_z = [](double) { return kInf; };
  CHECK(wiener_risk(blind) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("noise_floor_check examples") {
  auto s = smooth();
  quantum_limited(s);
  CHECK(noise_floor_check(s).empty());

  auto low = smooth();
  quantum_limited(low, 0.5);
  auto v = noise_floor_check(low);
  CHECK(v.size() == static_cast<std::size_t>(low.omega.size()));
  for (const auto& x : v) CHECK(x.margin == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::is_sorted(v.begin(), v.end(), [](auto& a, auto& b) { return a.omega < b.omega; }));

  auto perfect = smooth();
  quantum_limited(perfect, 0.5);
  perfect.s_q = [](double) { return kInf; };
  CHECK(noise_floor_check(perfect).empty());
}

TEST_CASE("Wiener risk dominates Q_max when the noise floor is respected") {
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    auto s = smooth();
    const double c = 1.0 + 3 * unif(rng), w0 = 1 + 4 * unif(rng);
    quantum_limited(s);
    auto sz = s.s_z;
    s.s_z = [=](double w) { return sz(w) * (c + std::cos(w / w0) * (c - 1) * 0.5 + 0 * w); };
    REQUIRE(noise_floor_check(s).empty());
    CHECK(wiener_risk(s) >= continuum_qmax(s));
  }
}

TEST_CASE("tabulated spectra from CSV") {
  const std::string path = "test_waveform_spectrum.csv";
  {
    std::ofstream out(path);
    out << "omega,value\n-1,2\n0,4\n1,2\n";
  }
  auto s = read_spectrum_csv(path);
  CHECK(s(0.5) == doctest::Approx(3.0));
  CHECK(s(-3) == 2.0);
  std::remove(path.c_str());
  CHECK_THROWS_AS(read_spectrum_csv("does/not/exist.csv"), InvalidArgument);
}
