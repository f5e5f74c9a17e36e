#include "bcrb/quantum_info.hpp"

#include "bcrb/errors.hpp"

#include <cmath>
#include <sstream>

namespace bcrb {

namespace {

std::string describe_theta(const Vec& theta) {
  std::ostringstream os;
  os << "theta = (";
  for (Index a = 0; a < theta.size(); ++a) os << (a ? ", " : "") << theta[a];
  os << ")";
  return os.str();
}

CMat jordan(const CMat& a, const CMat& b) { return 0.5 * (a * b + b * a); }

}  // namespace

DensityFamily::DensityFamily(int hilbert_dim, int params, StateFn rho, DerivativeFn derivative,
                             double fd_step)
    : dim_(hilbert_dim),
      params_(params),
      rho_(std::move(rho)),
      derivative_(std::move(derivative)),
      fd_step_(fd_step) {
  if (dim_ < 1 || params_ < 1) throw InvalidArgument("DensityFamily: need d >= 1 and p >= 1");
  if (!rho_) throw InvalidArgument("DensityFamily: missing state callback");
  if (!(fd_step_ > 0.0)) throw InvalidArgument("DensityFamily: fd_step must be positive");
}

CMat DensityFamily::rho(const Vec& theta) const {
  if (theta.size() != params_) throw InvalidArgument("DensityFamily: theta has the wrong size");
  CMat r = rho_(theta);
  if (r.rows() != dim_ || r.cols() != dim_)
    throw InvalidArgument("DensityFamily: state has the wrong dimension at " + describe_theta(theta));
  if ((r - r.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
    throw InvalidArgument("DensityFamily: state is not Hermitian at " + describe_theta(theta));
  if (std::abs(r.trace() - Complex(1.0)) > 1e-10)
    throw InvalidArgument("DensityFamily: trace differs from 1 at " + describe_theta(theta));
  Eigen::SelfAdjointEigenSolver<CMat> es(r, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-10)
    throw InvalidArgument("DensityFamily: state is not positive semidefinite at " +
                          describe_theta(theta));
  return r;
}

std::vector<CMat> DensityFamily::derivatives(const Vec& theta) const {
  if (theta.size() != params_) throw InvalidArgument("DensityFamily: theta has the wrong size");
  if (derivative_) {
    auto d = derivative_(theta);
    if (static_cast<int>(d.size()) != params_)
      throw InvalidArgument("DensityFamily: derivative callback returned the wrong count");
    for (auto& m : d)
      if (m.rows() != dim_ || m.cols() != dim_)
        throw InvalidArgument("DensityFamily: derivative has the wrong dimension");
    return d;
  }
  std::vector<CMat> d(params_);
  for (int a = 0; a < params_; ++a) {
    const double h = fd_step_ * std::max(1.0, std::abs(theta[a]));
    Vec plus = theta, minus = theta;
    plus[a] += h;
    minus[a] -= h;
    d[a] = (rho_(plus) - rho_(minus)) / (2.0 * h);
  }
  return d;
}

DensityFamily DensityFamily::conjugated(const CMat& unitary) const {
  if (unitary.rows() != dim_ || unitary.cols() != dim_)
    throw InvalidArgument("DensityFamily::conjugated: unitary has the wrong dimension");
  if ((unitary * unitary.adjoint() - CMat::Identity(dim_, dim_)).cwiseAbs().maxCoeff() > 1e-12)
    throw InvalidArgument("DensityFamily::conjugated: matrix is not unitary");
  const DensityFamily base = *this;
  StateFn r = [base, unitary](const Vec& t) { return CMat(unitary * base.rho_(t) * unitary.adjoint()); };
  DerivativeFn d;
  if (derivative_)
    d = [base, unitary](const Vec& t) {
      auto ds = base.derivative_(t);
      for (auto& m : ds) m = unitary * m * unitary.adjoint();
      return ds;
    };
  return DensityFamily(dim_, params_, std::move(r), std::move(d), fd_step_);
}

std::vector<CMat> sld_scores(const DensityFamily& family, const Vec& theta) {
  const CMat r = family.rho(theta);
  const auto d = family.derivatives(theta);
  Eigen::SelfAdjointEigenSolver<CMat> es(r);
  const Vec p = es.eigenvalues();
  const CMat& basis = es.eigenvectors();
  const double cutoff = kSldCutoff * std::abs(r.trace());
  const int dim = family.hilbert_dim();

  std::vector<CMat> scores;
  for (const CMat& da : d) {
    const CMat local = basis.adjoint() * da * basis;
    const double scale = std::max(1.0, local.cwiseAbs().maxCoeff());
    CMat s = CMat::Zero(dim, dim);
    for (int j = 0; j < dim; ++j)
      for (int k = 0; k < dim; ++k) {
        const double sum = p[j] + p[k];
        if (sum > cutoff) {
          s(j, k) = 2.0 * local(j, k) / sum;
        } else if (std::abs(local(j, k)) > 1e-8 * scale) {
          throw SingularError("family not differentiable in trace norm at " + describe_theta(theta));
        }
      }
    CMat score = basis * s * basis.adjoint();
    score = (0.5 * (score + score.adjoint())).eval();
    const double residual = (jordan(r, score) - da).cwiseAbs().maxCoeff();
    if (residual > 1e-8 * scale) {
      std::ostringstream os;
      os << "sld_scores: Jordan-product residual " << residual << " at " << describe_theta(theta);
      throw ConvergenceError(os.str());
    }
    scores.push_back(std::move(score));
  }
  return scores;
}

Mat helstrom_matrix(const DensityFamily& family, const Vec& theta) {
  const CMat r = family.rho(theta);
  const auto s = sld_scores(family, theta);
  const int p = family.params();
  Mat k(p, p);
  for (int a = 0; a < p; ++a)
    for (int b = a; b < p; ++b) k(a, b) = k(b, a) = (r * jordan(s[a], s[b])).trace().real();
  return k;
}

MatrixField helstrom_field(const DensityFamily& family, const ParameterGrid& grid) {
  if (grid.dim() != family.params())
    throw GridMismatchError("helstrom_field: grid dimension differs from the parameter count");
  return MatrixField::from_function(grid, [&](const Vec& t) { return helstrom_matrix(family, t); });
}

void require_dominates(const MatrixField& k, const MatrixField& f) {
  require_same_grid(k.grid(), f.grid(), "require_dominates");
  for (Index i = 0; i < k.grid().size(); ++i) {
    Eigen::SelfAdjointEigenSolver<Mat> es(k[i] - f[i], Eigen::EigenvaluesOnly);
    const double tol = 1e-10 * std::max(1.0, std::abs(k[i].trace()));
    if (es.eigenvalues().minCoeff() < -tol)
      throw InvalidArgument("Helstrom information does not dominate the Fisher information at " +
                            describe_theta(k.grid().coords(i)));
  }
}

QmaxResult qmax(const StatisticalModel& model, const MatrixField& helstrom, double n,
                const std::optional<MatrixField>& classical_fisher) {
  require_same_grid(model.grid(), helstrom.grid(), "qmax");
  QmaxResult out{bmax(model.with_fisher(helstrom), n), std::nullopt};
  out.quantum.report.v_choice = "quantum-optimal";
  if (classical_fisher) {
    require_dominates(helstrom, *classical_fisher);
    out.classical = bmax(model.with_fisher(*classical_fisher), n);
    const double b = out.classical->report.B, q = out.quantum.report.B;
    if (q > b + 1e-10 + 1e-12 * std::abs(b)) {
      std::ostringstream os;
      os << "qmax: Q_max = " << q << " exceeds B_max = " << b;
      throw Error(os.str());
    }
  }
  return out;
}

double snr_observable(const DensityFamily& family, const Vec& theta, const Vec& v, const CMat& y) {
  if (v.size() != family.params()) throw InvalidArgument("snr_observable: v has the wrong size");
  if (y.rows() != family.hilbert_dim() || y.cols() != family.hilbert_dim())
    throw InvalidArgument("snr_observable: observable has the wrong dimension");
  if ((y - y.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, y.cwiseAbs().maxCoeff()))
    throw InvalidArgument("snr_observable: observable is not Hermitian");
  const CMat r = family.rho(theta);
  const auto d = family.derivatives(theta);
  const double mean = (r * y).trace().real();
  double slope = 0.0;
  for (int a = 0; a < family.params(); ++a) slope += v[a] * (d[a] * y).trace().real();
  const CMat centered = y - mean * CMat::Identity(y.rows(), y.cols());
  const double scale = std::max(1e-300, (y * y).cwiseAbs().maxCoeff());
  // a multiple of the identity has a constant mean and carries no signal
  if (centered.cwiseAbs().maxCoeff() <= 1e-14 * std::sqrt(scale)) return 0.0;
  const double variance = (centered * centered * r).trace().real();
  if (!(variance > 1e-14 * scale))
    throw InvalidArgument("snr_observable: observable has zero variance in this state");
  return slope * slope / variance;
}

GaussianShiftBounds gaussian_shift_bounds(const Mat& k, const Mat& g, const Vec& u) {
  const Index m = k.rows();
  if (k.cols() != m || g.rows() != m || g.cols() != m || u.size() != m)
    throw InvalidArgument("gaussian_shift_bounds: K, G and u must have matching sizes");
  Eigen::LLT<Mat> full(k + g), half(0.5 * k + g);
  if (full.info() != Eigen::Success || half.info() != Eigen::Success)
    throw SingularError("gaussian_shift_bounds: K + G and K/2 + G must be positive definite");
  GaussianShiftBounds out;
  out.q_max = u.dot(full.solve(u));
  out.achieved_risk = u.dot(half.solve(u));
  const double tol = 1e-10 * std::max(1.0, out.achieved_risk);
  if (out.q_max > out.achieved_risk + tol || out.achieved_risk > 2 * out.q_max + tol)
    throw Error("gaussian_shift_bounds: sandwich Q_max <= risk <= 2 Q_max violated");
  return out;
}

}  // namespace bcrb
