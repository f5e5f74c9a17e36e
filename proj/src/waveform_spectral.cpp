#include "bcrb/waveform_spectral.hpp"

#include "bcrb/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <sstream>

namespace bcrb {

namespace {

// h2 / (a + 1/s_theta), with s_theta = 0 meaning a perfect prior and a = inf a
// perfect measurement.
double spectral_ratio(double h2, double a, double s_theta, double omega) {
  if (h2 == 0.0 || s_theta == 0.0 || std::isinf(a)) return 0.0;
  if (std::isinf(s_theta)) {
    if (!(a > 0.0)) {
      std::ostringstream os;
      os << "zero denominator at omega = " << omega
         << ": no measurement information and no prior information";
      throw SingularError(os.str());
    }
    return h2 / a;
  }
  return h2 / (a + 1.0 / s_theta);
}

double h2_at(const SpectralModel& s, double w) { return s.h2 ? s.h2(w) : 1.0; }

double quantum_density(const SpectralModel& s, double w) {
  return 4.0 * s.s_q(w) / (s.hbar * s.hbar);
}

double measurement_density(const SpectralModel& s, double w) {
  const double z = s.s_z(w);
  const double x = s.hx2(w);
  if (std::isinf(z) || x == 0.0) return 0.0;
  if (z == 0.0) return std::numeric_limits<double>::infinity();
  return x / z;
}

double integrate_spectrum(const SpectralModel& s, const std::function<double(double)>& f,
                          const char* what) {
  const Vec& w = s.omega;
  double peak = 0.0;
  for (Index j = 0; j < w.size(); ++j) peak = std::max(peak, std::abs(f(w[j])));
  const double edge = std::max(std::abs(f(w[0])), std::abs(f(w[w.size() - 1])));
  if (edge > 1e-6 * peak) {
    std::ostringstream os;
    os << what << ": integrand at the grid edge (" << edge << ") exceeds 1e-6 of its peak (" << peak
       << "); widen the frequency grid beyond |omega| = " << w[w.size() - 1];
    throw RangeError(os.str());
  }
  using boost::math::quadrature::gauss_kronrod;
  double total = 0.0;
  for (Index j = 0; j + 1 < w.size(); ++j)
    total += gauss_kronrod<double, 15>::integrate(f, w[j], w[j + 1], 5, 1e-12);
  return total / (2.0 * M_PI);
}

}  // namespace

Spectrum tabulated_spectrum(Vec omega, Vec values) {
  if (omega.size() < 2 || omega.size() != values.size())
    throw InvalidArgument("tabulated_spectrum: need at least two (omega, value) samples");
  for (Index i = 0; i + 1 < omega.size(); ++i)
    if (!(omega[i + 1] > omega[i]))
      throw InvalidArgument("tabulated_spectrum: omega must be strictly increasing");
  return [omega = std::move(omega), values = std::move(values)](double w) {
    const Index n = omega.size();
    if (w <= omega[0]) return values[0];
    if (w >= omega[n - 1]) return values[n - 1];
    const Index k = std::upper_bound(omega.data(), omega.data() + n, w) - omega.data() - 1;
    const double t = (w - omega[k]) / (omega[k + 1] - omega[k]);
    return (1 - t) * values[k] + t * values[k + 1];
  };
}

Spectrum read_spectrum_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("read_spectrum_csv: cannot open " + path);
  std::vector<double> w, v;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    double a, b;
    if (!(row >> a >> b)) {
      if (w.empty() && line_no == 1) continue;  // header
      throw InvalidArgument("read_spectrum_csv: malformed line " + std::to_string(line_no) +
                            " in " + path);
    }
    w.push_back(a);
    v.push_back(b);
  }
  return tabulated_spectrum(Eigen::Map<Vec>(w.data(), w.size()), Eigen::Map<Vec>(v.data(), v.size()));
}

Vec SpectralModel::symmetric_grid(double omega_max, int nodes) {
  if (!(omega_max > 0.0) || nodes < 3 || nodes % 2 == 0)
    throw InvalidArgument("symmetric_grid: need omega_max > 0 and an odd node count >= 3");
  return Vec::LinSpaced(nodes, -omega_max, omega_max);
}

void SpectralModel::validate() const {
  if (omega.size() < 3) throw InvalidArgument("SpectralModel: frequency grid needs >= 3 nodes");
  const Index n = omega.size();
  const double step = (omega[n - 1] - omega[0]) / (n - 1);
  for (Index j = 0; j < n; ++j) {
    if (std::abs(omega[j] - (omega[0] + j * step)) > 1e-9 * std::abs(step))
      throw InvalidArgument("SpectralModel: frequency grid must be uniform");
    if (std::abs(omega[j] + omega[n - 1 - j]) > 1e-9 * std::abs(step))
      throw InvalidArgument("SpectralModel: frequency grid must be symmetric about 0");
  }
  if (!(hbar > 0.0)) throw InvalidArgument("SpectralModel: hbar must be positive");
  if (!s_q || !s_theta) throw InvalidArgument("SpectralModel: S_q and S_theta are required");
  auto check = [&](const Spectrum& s, const char* name) {
    if (!s) return;
    for (Index j = 0; j < n; ++j) {
      const double a = s(omega[j]), b = s(-omega[j]);
      if (!(a >= 0.0)) {
        std::ostringstream os;
        os << "SpectralModel: " << name << " is negative at omega = " << omega[j];
        throw InvalidArgument(os.str());
      }
      if (a != b && std::abs(a - b) > 1e-12 * std::max(std::abs(a), std::abs(b))) {
        std::ostringstream os;
        os << "SpectralModel: " << name << " is not even in omega at " << omega[j];
        throw InvalidArgument(os.str());
      }
    }
  };
  check(s_q, "S_q");
  check(s_theta, "S_theta");
  check(s_z, "S_Z");
  check(hx2, "|h_X|^2");
  check(h2, "|h|^2");
}

double TimeDiscretization::omega(int j) const {
  return 2.0 * M_PI * (j - p / 2) / T;
}

TimeDiscretization TimeDiscretization::instant(double T, int p, int slot) {
  TimeDiscretization d;
  d.T = T;
  d.p = p;
  d.h = Vec::Zero(p);
  if (slot < 0 || slot >= p) throw InvalidArgument("TimeDiscretization::instant: slot out of range");
  d.h[slot] = p / T;
  return d;
}

void TimeDiscretization::validate() const {
  if (p < 2) throw InvalidArgument("TimeDiscretization: need p >= 2");
  if (!(T > 0.0)) throw InvalidArgument("TimeDiscretization: T must be positive");
  if (h.size() != p) throw InvalidArgument("TimeDiscretization: need p weight samples");
}

double build_circulant_bound(const TimeDiscretization& disc, const SpectralModel& spectra) {
  disc.validate();
  if (!spectra.s_q || !spectra.s_theta)
    throw InvalidArgument("build_circulant_bound: S_q and S_theta are required");
  const double dt = disc.dt();
  double total = 0.0;
  for (int j = 0; j < disc.p; ++j) {
    const double w = disc.omega(j);
    std::complex<double> hw = 0.0;
    for (int a = 0; a < disc.p; ++a)
      if (disc.h[a] != 0.0) hw += disc.h[a] * std::polar(1.0, -w * a * dt);
    const double h2 = dt * dt * std::norm(hw);
    total += spectral_ratio(h2, quantum_density(spectra, w), spectra.s_theta(w), w);
  }
  return total / disc.T;
}

std::pair<Mat, Mat> circulant_matrices(const TimeDiscretization& disc,
                                       const SpectralModel& spectra) {
  disc.validate();
  const int p = disc.p;
  const double dt = disc.dt();
  Mat k = Mat::Zero(p, p), g = Mat::Zero(p, p);
  for (int j = 0; j < p; ++j) {
    const double w = disc.omega(j);
    const double kq = quantum_density(spectra, w) * dt;
    const double st = spectra.s_theta(w);
    if (!(st > 0.0) || std::isinf(st))
      throw InvalidArgument("circulant_matrices: S_theta must be positive and finite");
    const double gq = dt / st;
    for (int a = 0; a < p; ++a)
      for (int b = 0; b < p; ++b) {
        const double c = std::cos(w * (a - b) * dt) / p;
        k(a, b) += kq * c;
        g(a, b) += gq * c;
      }
  }
  return {k, g};
}

double continuum_qmax(const SpectralModel& spectra) {
  spectra.validate();
  return integrate_spectrum(
      spectra,
      [&](double w) {
        return spectral_ratio(h2_at(spectra, w), quantum_density(spectra, w), spectra.s_theta(w), w);
      },
      "continuum_qmax");
}

double wiener_risk(const SpectralModel& spectra) {
  spectra.validate();
  if (!spectra.s_z || !spectra.hx2) throw InvalidArgument("wiener_risk: S_Z and |h_X|^2 are required");
  return integrate_spectrum(
      spectra,
      [&](double w) {
        return spectral_ratio(h2_at(spectra, w), measurement_density(spectra, w), spectra.s_theta(w), w);
      },
      "wiener_risk");
}

std::vector<NoiseFloorViolation> noise_floor_check(const SpectralModel& spectra) {
  spectra.validate();
  if (!spectra.s_z || !spectra.hx2)
    throw InvalidArgument("noise_floor_check: S_Z and |h_X|^2 are required");
  std::vector<NoiseFloorViolation> out;
  for (Index j = 0; j < spectra.omega.size(); ++j) {
    const double w = spectra.omega[j];
    const double x = spectra.hx2(w);
    if (!(x > 0.0)) continue;
    const double sq = spectra.s_q(w);
    if (std::isinf(sq)) continue;
    const double floor = spectra.s_z(w) / x;
    const double limit = sq > 0.0 ? spectra.hbar * spectra.hbar / (4.0 * sq)
                                  : std::numeric_limits<double>::infinity();
    if (floor < limit * (1.0 - 1e-12)) out.push_back({w, floor, limit, limit / floor});
  }
  return out;
}

}  // namespace bcrb
