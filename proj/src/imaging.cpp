#include "bcrb/imaging.hpp"

#include "bcrb/errors.hpp"
#include "bcrb/optimal_field.hpp"
#include "bcrb/parallel.hpp"

#include <Eigen/SVD>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>

namespace bcrb {

namespace {

using Integrand = std::function<void(double, Vec&)>;

// Kronrod-15 on [a, b] with a Gauss-7 error estimate, bisected until the
// estimate is below max(tol |I|, floor (b - a)).
void integrate_panel(const Integrand& f, double a, double b, double tol, double floor, int depth,
                     Vec& total, Vec& work) {
  using boost::math::quadrature::gauss;
  using boost::math::quadrature::gauss_kronrod;
  static const auto kx = gauss_kronrod<double, 15>::abscissa();
  static const auto kw = gauss_kronrod<double, 15>::weights();
  static const auto gx = gauss<double, 7>::abscissa();
  static const auto gw = gauss<double, 7>::weights();
  const double c = 0.5 * (a + b), r = 0.5 * (b - a);
  Vec kron = Vec::Zero(total.size()), gsum = Vec::Zero(total.size());
  for (std::size_t i = 0; i < kx.size(); ++i) {
    f(c + r * kx[i], work);
    kron += kw[i] * work;
    if (i > 0) {
      f(c - r * kx[i], work);
      kron += kw[i] * work;
    }
  }
  for (std::size_t i = 0; i < gx.size(); ++i) {
    f(c + r * gx[i], work);
    gsum += gw[i] * work;
    if (i > 0) {
      f(c - r * gx[i], work);
      gsum += gw[i] * work;
    }
  }
  kron *= r;
  gsum *= r;
  const double err = (kron - gsum).cwiseAbs().maxCoeff();
  if (err <= std::max(tol * kron.cwiseAbs().maxCoeff(), floor * (b - a)) || depth <= 0) {
    total += kron;
    return;
  }
  integrate_panel(f, a, c, tol, floor, depth - 1, total, work);
  integrate_panel(f, c, b, tol, floor, depth - 1, total, work);
}

struct ImagePlane {
  double lo, hi;
  std::vector<double> breaks;
};

ImagePlane image_plane(const PointSpreadFunction& psf, const Vec& theta, const ImagingOptions& o) {
  if (theta.size() < 1) throw InvalidArgument("imaging: need at least one source");
  if (o.nodes < 16) throw InvalidArgument("imaging: need at least 16 image-plane nodes");
  ImagePlane plane;
  plane.lo = theta.minCoeff() - o.span_sigmas * psf.sigma;
  plane.hi = theta.maxCoeff() + o.span_sigmas * psf.sigma;
  const double step = (plane.hi - plane.lo) / (o.nodes - 1);
  for (int k = 0; k < o.nodes; ++k) plane.breaks.push_back(plane.lo + k * step);
  for (Index a = 0; a < theta.size(); ++a) {
    plane.breaks.push_back(theta[a]);
    for (double z : psf.zeros) plane.breaks.push_back(theta[a] + z);
  }
  std::sort(plane.breaks.begin(), plane.breaks.end());
  std::vector<double> kept;
  for (double x : plane.breaks) {
    if (x < plane.lo || x > plane.hi) continue;
    if (!kept.empty() && x - kept.back() <= 1e-14 * (plane.hi - plane.lo)) continue;
    kept.push_back(x);
  }
  plane.breaks = std::move(kept);
  return plane;
}

// Integrates the vector integrand over the image plane; component 0 must be f
// itself and is used for the coverage check.
Vec integrate_image(const PointSpreadFunction& psf, const Vec& theta, const ImagingOptions& o,
                    int components, const Integrand& f) {
  const ImagePlane plane = image_plane(psf, theta, o);
  Vec total = Vec::Zero(components), work(components);
  for (std::size_t k = 0; k + 1 < plane.breaks.size(); ++k)
    integrate_panel(f, plane.breaks[k], plane.breaks[k + 1], 1e-10, 1e-13 / (plane.hi - plane.lo), 20,
                    total, work);
  if (std::abs(total[0] - 1.0) > 1e-6) {
    std::ostringstream os;
    os << "imaging: image plane [" << plane.lo << ", " << plane.hi << "] captures " << total[0]
       << " of the intensity; increase span_sigmas";
    throw RangeError(os.str());
  }
  return total;
}

double hermite_function(int k, double y, double& prev, double& cur) {
  // orthonormal Hermite functions by recurrence, y in units of the mode length
  if (k == 0) {
    prev = 0.0;
    cur = std::pow(M_PI, -0.25) * std::exp(-0.5 * y * y);
    return cur;
  }
  const double next = std::sqrt(2.0 / k) * y * cur - std::sqrt((k - 1.0) / k) * prev;
  prev = cur;
  cur = next;
  return cur;
}

std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y,
                                     double* r_squared) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  if (r_squared) *r_squared = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
  return {slope, my - slope * mx};
}

}  // namespace

// ---------------------------------------------------------------------------
// PSF catalog
// ---------------------------------------------------------------------------

PointSpreadFunction PointSpreadFunction::gaussian(double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("psf: sigma must be positive");
  const double c = std::pow(2 * M_PI * sigma * sigma, -0.25);
  PointSpreadFunction psf;
  psf.name = "gaussian";
  psf.sigma = sigma;
  psf.amplitude = [=](double x) { return c * std::exp(-x * x / (4 * sigma * sigma)); };
  psf.derivative = [=](double x) {
    return -x / (2 * sigma * sigma) * c * std::exp(-x * x / (4 * sigma * sigma));
  };
  return psf;
}

PointSpreadFunction PointSpreadFunction::hermite1(double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("psf: sigma must be positive");
  const double c = std::pow(2 * M_PI * sigma * sigma, -0.25);
  PointSpreadFunction psf;
  psf.name = "first-order-hermite";
  psf.sigma = sigma;
  psf.amplitude = [=](double x) { return c * (x / sigma) * std::exp(-x * x / (4 * sigma * sigma)); };
  psf.derivative = [=](double x) {
    const double g = c * std::exp(-x * x / (4 * sigma * sigma));
    return g / sigma * (1 - x * x / (2 * sigma * sigma));
  };
  psf.zeros = {0.0};
  return psf;
}

PointSpreadFunction PointSpreadFunction::sinc(double sigma, int listed_zeros) {
  if (!(sigma > 0.0)) throw InvalidArgument("psf: sigma must be positive");
  const double c = 1.0 / std::sqrt(sigma);
  PointSpreadFunction psf;
  psf.name = "sinc";
  psf.sigma = sigma;
  psf.amplitude = [=](double x) {
    const double y = M_PI * x / sigma;
    return std::abs(y) < 1e-8 ? c * (1 - y * y / 6) : c * std::sin(y) / y;
  };
  psf.derivative = [=](double x) {
    const double y = M_PI * x / sigma;
    if (std::abs(y) < 1e-4) return -c * (M_PI / sigma) * y / 3;
    return c * (M_PI / sigma) * (std::cos(y) * y - std::sin(y)) / (y * y);
  };
  for (int k = 1; k <= listed_zeros; ++k) {
    psf.zeros.push_back(k * sigma);
    psf.zeros.push_back(-k * sigma);
  }
  std::sort(psf.zeros.begin(), psf.zeros.end());
  return psf;
}

PointSpreadFunction PointSpreadFunction::from_catalog(const std::string& name, double sigma) {
  if (name == "gaussian") return gaussian(sigma);
  if (name == "first-order-hermite") return hermite1(sigma);
  if (name == "sinc") return sinc(sigma);
  throw InvalidArgument("psf: unknown catalog entry '" + name +
                        "' (expected gaussian, first-order-hermite or sinc)");
}

PointSpreadFunction PointSpreadFunction::from_csv(const std::string& path, double sigma) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("psf: cannot open " + path);
  std::vector<double> xs, amps;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    double x, a;
    if (!(row >> x >> a)) {
      if (xs.empty() && line_no == 1) continue;
      throw InvalidArgument("psf: malformed line " + std::to_string(line_no) + " in " + path);
    }
    xs.push_back(x);
    amps.push_back(a);
  }
  if (xs.size() < 8) throw InvalidArgument("psf: need at least 8 samples in " + path);
  const double step = (xs.back() - xs.front()) / (xs.size() - 1);
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (std::abs(xs[i] - (xs.front() + i * step)) > 1e-9 * step)
      throw InvalidArgument("psf: samples in " + path + " must be uniformly spaced");
  double norm = 0.0;
  for (std::size_t i = 0; i < amps.size(); ++i)
    norm += (i == 0 || i + 1 == amps.size() ? 0.5 : 1.0) * amps[i] * amps[i] * step;
  if (!(norm > 0.0)) throw InvalidArgument("psf: amplitude in " + path + " is identically zero");
  const double scale = 1.0 / std::sqrt(norm);
  std::vector<double> zeros;
  for (std::size_t i = 0; i < amps.size(); ++i) {
    if (amps[i] == 0.0 && i > 0 && i + 1 < amps.size()) zeros.push_back(xs[i]);
    if (i + 1 < amps.size() && amps[i] * amps[i + 1] < 0.0)
      zeros.push_back(xs[i] + step * amps[i] / (amps[i] - amps[i + 1]));
  }
  auto spline = std::make_shared<boost::math::interpolators::cardinal_cubic_b_spline<double>>(
      amps.begin(), amps.end(), xs.front(), step);
  const double lo = xs.front(), hi = xs.back();
  PointSpreadFunction psf;
  psf.name = "csv:" + path;
  psf.sigma = sigma;
  psf.amplitude = [=](double x) { return x < lo || x > hi ? 0.0 : scale * (*spline)(x); };
  psf.derivative = [=](double x) { return x < lo || x > hi ? 0.0 : scale * spline->prime(x); };
  psf.zeros = zeros;
  return psf;
}

// ---------------------------------------------------------------------------
// Direct imaging
// ---------------------------------------------------------------------------

Vec centroid_weights(int p) { return Vec::Constant(p, 1.0 / p); }

Mat direct_imaging_fisher(const PointSpreadFunction& psf, const Vec& theta,
                          const ImagingOptions& options) {
  const int p = static_cast<int>(theta.size());
  const int pairs = p * (p + 1) / 2;
  Vec g(p);
  const Vec total = integrate_image(psf, theta, options, 1 + pairs, [&](double x, Vec& out) {
    double f = 0.0;
    for (int a = 0; a < p; ++a) {
      const double amp = psf.amplitude(x - theta[a]);
      f += amp * amp / p;
      g[a] = -2.0 * amp * psf.derivative(x - theta[a]) / p;
    }
    out[0] = f;
    int k = 1;
    for (int a = 0; a < p; ++a)
      for (int b = a; b < p; ++b) out[k++] = f < options.intensity_floor ? 0.0 : g[a] * g[b] / f;
  });
  Mat fisher(p, p);
  int k = 1;
  for (int a = 0; a < p; ++a)
    for (int b = a; b < p; ++b) fisher(a, b) = fisher(b, a) = total[k++];
  return fisher;
}

double directional_fisher(const PointSpreadFunction& psf, const Vec& theta0, const Vec& v, double tau,
                          const ImagingOptions& options) {
  if (v.size() != theta0.size()) throw InvalidArgument("directional_fisher: v has the wrong size");
  const Vec theta = theta0 + tau * v;
  const int p = static_cast<int>(theta.size());
  const Vec total = integrate_image(psf, theta, options, 2, [&](double x, Vec& out) {
    double f = 0.0, dv = 0.0;
    for (int a = 0; a < p; ++a) {
      const double amp = psf.amplitude(x - theta[a]);
      f += amp * amp / p;
      dv -= v[a] * 2.0 * amp * psf.derivative(x - theta[a]) / p;
    }
    out[0] = f;
    out[1] = f < options.intensity_floor ? 0.0 : dv * dv / f;
  });
  return total[1];
}

ExponentFit exponent_fit(const PointSpreadFunction& psf, const Vec& theta0, const Vec& v,
                         const std::vector<double>& tau_list, const ImagingOptions& options) {
  if (tau_list.size() < 3) throw InvalidArgument("exponent_fit: need at least three separations");
  const auto [lo, hi] = std::minmax_element(tau_list.begin(), tau_list.end());
  if (!(*lo > 0.0)) throw InvalidArgument("exponent_fit: separations must be positive");
  if (*hi / *lo < 100.0 * (1 - 1e-12))
    throw InvalidArgument("exponent_fit: separations must span at least two decades");
  ExponentFit fit;
  fit.samples.resize(tau_list.size());
  parallel_for(tau_list.size(), [&](std::size_t i) {
    fit.samples[i] = {tau_list[i], directional_fisher(psf, theta0, v, tau_list[i], options)};
  });
  std::vector<double> x, y;
  for (const auto& [t, f] : fit.samples) {
    if (!(f > 0.0)) {
      std::ostringstream os;
      os << "exponent_fit: information vanishes at tau = " << t << "; no power law to fit";
      throw SingularError(os.str());
    }
    x.push_back(std::log(t));
    y.push_back(std::log(f));
  }
  double intercept;
  std::tie(fit.m, intercept) = linear_fit(x, y, &fit.r_squared);
  fit.amplitude = std::exp(intercept);
  if (fit.r_squared < 0.99) {
    std::ostringstream os;
    os << "exponent_fit: poor power-law fit (R^2 = " << fit.r_squared << "); residuals:";
    for (std::size_t i = 0; i < x.size(); ++i) os << " " << y[i] - (intercept + fit.m * x[i]);
    fit.warning = os.str();
  }
  return fit;
}

std::function<double(double)> directional_fisher_table(const PointSpreadFunction& psf,
                                                       const Vec& theta0, const Vec& v,
                                                       double tau_min, double tau_max, int points,
                                                       const ImagingOptions& options) {
  if (!(tau_min > 0.0) || !(tau_max > tau_min) || points < 4)
    throw InvalidArgument("directional_fisher_table: need 0 < tau_min < tau_max and >= 4 points");
  const double zero = directional_fisher(psf, theta0, v, 0.0, options);
  std::vector<double> taus(points);
  for (int k = 0; k < points; ++k)
    taus[k] = tau_min * std::pow(tau_max / tau_min, static_cast<double>(k) / (points - 1));
  std::vector<double> pos(points), neg(points);
  parallel_for(2 * static_cast<std::size_t>(points), [&](std::size_t i) {
    const int k = static_cast<int>(i % points);
    const double sign = i < static_cast<std::size_t>(points) ? 1.0 : -1.0;
    (sign > 0 ? pos : neg)[k] = directional_fisher(psf, theta0, v, sign * taus[k], options);
  });
  auto side = [taus, zero](const std::vector<double>& vals) {
    std::vector<double> logs(vals.size());
    for (std::size_t k = 0; k < vals.size(); ++k) logs[k] = std::log(std::max(vals[k], 1e-300));
    // exponent of the innermost interval, used below tau_min
    const double m0 = (logs[1] - logs[0]) / std::log(taus[1] / taus[0]);
    return [taus, vals, logs, zero, m0](double t) {
      const std::size_t n = taus.size();
      if (t <= 0.0) return zero;
      if (t < taus[0]) return vals[0] * std::pow(t / taus[0], m0);
      if (t >= taus[n - 1]) return vals[n - 1];
      const std::size_t k = std::upper_bound(taus.begin(), taus.end(), t) - taus.begin() - 1;
      const double s = std::log(t / taus[k]) / std::log(taus[k + 1] / taus[k]);
      return std::exp((1 - s) * logs[k] + s * logs[k + 1]);
    };
  };
  auto right = side(pos), left = side(neg);
  return [right, left](double t) { return t >= 0.0 ? right(t) : left(-t); };
}

RateFit minimax_rate(const PointSpreadFunction& psf, const Vec& theta0, const Vec& v,
                     const std::vector<double>& n_list, const ImagingOptions& options) {
  const double s = psf.sigma;
  std::vector<double> taus;
  for (int k = 0; k <= 8; ++k) taus.push_back(1e-3 * s * std::pow(10.0, k * 2.0 / 8));
  const ExponentFit fit = exponent_fit(psf, theta0, v, taus, options);
  RateOptions rate;
  rate.exponent = std::max(0.0, std::round(fit.m * 4) / 4);
  const double t_ref = 1e-2 * s;
  rate.amplitude = directional_fisher(psf, theta0, v, t_ref, options) / std::pow(t_ref, rate.exponent);
  if (!(rate.amplitude > 0.0)) throw SingularError("minimax_rate: directional information vanishes");
  const auto potential = directional_fisher_table(psf, theta0, v, 1e-4 * s, 1e3 * s, 281, options);
  return rate_fit(potential, n_list, rate);
}

// ---------------------------------------------------------------------------
// Helstrom information
// ---------------------------------------------------------------------------

HelstromReport imaging_helstrom(const PointSpreadFunction& psf, const Vec& theta,
                                const ImagingOptions& options) {
  const int p = static_cast<int>(theta.size());
  if (p < 1) throw InvalidArgument("imaging_helstrom: need at least one source");
  const ImagePlane plane = image_plane(psf, theta, options);
  const int nodes = options.nodes;
  const double step = (plane.hi - plane.lo) / (nodes - 1);
  const double center = theta.mean();
  const double length = std::sqrt(2.0) * psf.sigma;
  const int pad = options.basis_size;

  // Sampled functions scaled by sqrt(trapezoid weight): columns are Psi_a,
  // Psi_a' and the Hermite-Gauss padding modes.
  Mat samples(nodes, 2 * p + pad);
  for (int i = 0; i < nodes; ++i) {
    const double x = plane.lo + i * step;
    const double sw = std::sqrt(step * (i == 0 || i + 1 == nodes ? 0.5 : 1.0));
    for (int a = 0; a < p; ++a) {
      samples(i, a) = sw * psf.amplitude(x - theta[a]);
      samples(i, p + a) = -sw * psf.derivative(x - theta[a]);
    }
    double prev = 0.0, cur = 0.0;
    const double y = (x - center) / length;
    for (int k = 0; k < pad; ++k)
      samples(i, 2 * p + k) = sw * hermite_function(k, y, prev, cur) / std::sqrt(length);
  }
  Eigen::JacobiSVD<Mat> svd(samples, Eigen::ComputeThinU);
  const Vec& sv = svd.singularValues();
  int dim = 0;
  while (dim < sv.size() && sv[dim] > 1e-10 * sv[0]) ++dim;
  const Mat basis = svd.matrixU().leftCols(dim);

  HelstromReport report;
  report.basis_dim = dim;
  Mat coeff = basis.transpose() * samples.leftCols(2 * p);
  for (int c = 0; c < 2 * p; ++c) {
    const double full = samples.col(c).squaredNorm();
    if (full > 0.0)
      report.projection_error = std::max(report.projection_error, 1.0 - coeff.col(c).squaredNorm() / full);
  }
  if (report.projection_error > 1e-6) {
    std::ostringstream os;
    os << "imaging_helstrom: projection error " << report.projection_error
       << " exceeds 1e-6; increase basis_size";
    throw RangeError(os.str());
  }

  CMat rho = CMat::Zero(dim, dim);
  std::vector<CMat> drho(p, CMat::Zero(dim, dim));
  for (int a = 0; a < p; ++a) {
    const Vec c = coeff.col(a), d = coeff.col(p + a);
    rho += (c * c.transpose()).cast<Complex>() / p;
    drho[a] = ((d * c.transpose() + c * d.transpose()) / p).cast<Complex>();
  }
  const double trace = rho.trace().real();
  rho /= trace;
  for (auto& d : drho) d /= trace;
  rho = (0.5 * (rho + rho.adjoint())).eval();

  // The family is only evaluated at theta.
  DensityFamily family(
      dim, p, [rho](const Vec&) { return rho; }, [drho](const Vec&) { return drho; });
  report.k = helstrom_matrix(family, theta);
  Eigen::SelfAdjointEigenSolver<Mat> es(report.k, Eigen::EigenvaluesOnly);
  report.eigenvalues = es.eigenvalues().reverse();
  const double top = std::max(report.eigenvalues[0], 0.0);
  report.rank = 0;
  for (Index k = 0; k < report.eigenvalues.size(); ++k)
    if (report.eigenvalues[k] > 1e-6 * top) ++report.rank;
  return report;
}

ImagingBounds quantum_vs_classical(const PointSpreadFunction& psf, const ParameterGrid& grid,
                                   const std::function<double(const Vec&)>& prior, const Vec& u,
                                   double n, const ImagingOptions& options, bool force_equal) {
  const int p = grid.dim();
  if (u.size() != p) throw InvalidArgument("quantum_vs_classical: u has the wrong size");
  std::vector<Mat> f(grid.size()), k(grid.size());
  parallel_for(static_cast<std::size_t>(grid.size()), [&](std::size_t i) {
    const Vec theta = grid.coords(static_cast<Index>(i));
    f[i] = direct_imaging_fisher(psf, theta, options);
    k[i] = force_equal ? f[i] : imaging_helstrom(psf, theta, options).k;
  });
  ImagingBounds out;
  out.fisher = MatrixField(grid, std::move(f));
  out.helstrom = MatrixField(grid, std::move(k));
  ModelFunctions fn;
  fn.prior = prior;
  fn.fisher = [p](const Vec&) { return Mat(Mat::Identity(p, p)); };
  fn.weight = [u](const Vec&) { return u; };
  const StatisticalModel base = StatisticalModel::from_functions(grid, fn);
  const StatisticalModel model = base.with_fisher(out.fisher);
  if (u.cwiseAbs().maxCoeff() == 0.0) return out;
  const QmaxResult q = qmax(model, out.helstrom, n, out.fisher);
  out.q_max = q.quantum.report.B;
  out.b_max = q.classical->report.B;
  return out;
}

}  // namespace bcrb
