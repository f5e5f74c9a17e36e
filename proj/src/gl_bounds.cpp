#include "bcrb/gl_bounds.hpp"

#include "bcrb/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <cstdio>
#include <sstream>

namespace bcrb {

namespace {

void require_prior_ready(const StatisticalModel& model) {
  const ScalarField& rho = model.prior();
  const double mass = integrate(rho, model.metric());
  if (std::abs(mass - 1.0) > kNormalizationTolerance) {
    std::ostringstream os;
    os << "prior integrates to " << mass << " on " << model.grid().describe() << ", expected 1";
    throw InvalidArgument(os.str());
  }
}

void require_boundary_vanishing(const ScalarField& rho, const VectorField& v, double& residual) {
  residual = boundary_residual(rho, v);
  if (residual > kBoundaryTolerance) {
    std::ostringstream os;
    os << "rho v does not vanish on the boundary (relative residual " << residual
       << "); enlarge the domain or taper v towards the edges";
    throw BoundaryError(os.str());
  }
}

Vec quadrature_weights(const StatisticalModel& model) {
  const auto& grid = model.grid();
  const ScalarField sg = sqrt_det(model.metric());
  Vec w(grid.size());
  for (Index i = 0; i < grid.size(); ++i)
    w[i] = grid.trapezoid_weight(i) * sg[i] * model.prior()[i];
  return w;
}

ScalarField half_density(const ScalarField& rho) {
  return ScalarField(rho.grid(), rho.values().cwiseMax(0.0).cwiseSqrt());
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12e", x);
  return buf;
}

}  // namespace

std::string BoundReport::csv_header() { return "n,A,F,P,B,v_choice,residual"; }

std::string BoundReport::csv_row() const {
  return fmt(n) + "," + fmt(A) + "," + fmt(F) + "," + fmt(P) + "," + fmt(B) + "," + v_choice + "," +
         fmt(boundary_residual);
}

double prior_term(const ScalarField& rho, const VectorField& v, const MatrixField& metric) {
  CellDivergence cd(half_density(rho), metric);
  const Vec d = cd.apply(v);
  return cd.cell_weights().dot(d.cwiseProduct(d));
}

Functionals functionals(const StatisticalModel& model, const VectorField& v) {
  require_same_grid(model.grid(), v.grid(), "functionals");
  if (v.variance() != Variance::contravariant)
    throw InvalidArgument("functionals: v must be contravariant");
  require_prior_ready(model);
  Functionals out;
  require_boundary_vanishing(model.prior(), v, out.boundary_residual);

  const Vec w = quadrature_weights(model);
  for (Index i = 0; i < w.size(); ++i) {
    const Vec vi = v.at(i);
    out.A += w[i] * vi.dot(model.weight().at(i));
    out.F += w[i] * vi.dot(model.fisher()[i] * vi);
  }
  out.P = prior_term(model.prior(), v, model.metric());
  return out;
}

BoundReport gill_levit_bound(const StatisticalModel& model, const VectorField& v, double n,
                             const std::string& label) {
  if (!(n >= 0.0)) throw InvalidArgument("gill_levit_bound: n must be nonnegative");
  const Functionals f = functionals(model, v);
  const double denom = n * f.F + f.P;
  if (!(denom > 0.0))
    throw SingularError("degenerate direction: no information and no prior curvature");
  BoundReport r;
  r.A = f.A;
  r.F = f.F;
  r.P = f.P;
  r.n = n;
  r.B = f.A * f.A / denom;
  r.v_choice = label;
  r.boundary_residual = f.boundary_residual;
  r.grid = model.grid().describe();
  return r;
}

VectorField natural_v(const StatisticalModel& model) {
  const auto& grid = model.grid();
  Mat out(grid.size(), grid.dim());
  for (Index i = 0; i < grid.size(); ++i) {
    const Mat& f = model.fisher()[i];
    Eigen::SelfAdjointEigenSolver<Mat> es(f, Eigen::EigenvaluesOnly);
    const double trace = f.trace();
    if (!(trace > 0.0) || es.eigenvalues().minCoeff() <= 1e-10 * trace) {
      std::ostringstream os;
      os << "natural_v: Fisher information is singular at theta = "
         << grid.coords(i).transpose()
         << "; the natural v does not exist when u is outside the range of F";
      throw SingularError(os.str());
    }
    out.row(i) = f.ldlt().solve(model.weight().at(i)).transpose();
  }
  return VectorField(grid, std::move(out), Variance::contravariant);
}

BoundReport natural_bound(const StatisticalModel& model, double n) {
  const VectorField v = natural_v(model);
  BoundReport r = gill_levit_bound(model, v, n, "natural");
  if (std::abs(r.A - r.F) > 1e-10 * std::max(std::abs(r.A), 1e-300))
    throw Error("natural_bound: <A> and <F> disagree for the natural v");
  return r;
}

Mat mean_prior_information(const StatisticalModel& model) {
  const auto& grid = model.grid();
  const ScalarField pi = model.prior_density();
  if (pi.values().minCoeff() <= 0.0)
    throw InvalidArgument("mean_prior_information: prior must be strictly positive on every node");
  const VectorField score = gradient(ScalarField(grid, pi.values().array().log().matrix()));
  const Vec w = quadrature_weights(model);
  Mat g = Mat::Zero(grid.dim(), grid.dim());
  for (Index i = 0; i < grid.size(); ++i) {
    const Vec s = score.at(i);
    g += w[i] * s * s.transpose();
  }
  return g;
}

VanTreesResult van_trees_v(const StatisticalModel& model, double n) {
  if (!(n >= 0.0)) throw InvalidArgument("van_trees_v: n must be nonnegative");
  require_prior_ready(model);
  const auto& grid = model.grid();
  const int p = grid.dim();
  const Vec w = quadrature_weights(model);
  Mat mean_f = Mat::Zero(p, p);
  Vec mean_u = Vec::Zero(p);
  for (Index i = 0; i < grid.size(); ++i) {
    mean_f += w[i] * model.fisher()[i];
    mean_u += w[i] * model.weight().at(i);
  }
  const Mat mean_g = mean_prior_information(model);
  const Mat m = n * mean_f + mean_g;
  Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success)
    throw SingularError("van_trees_v: n<F> + <G> is not invertible");
  const Vec v = llt.solve(mean_u);

  VanTreesResult out;
  out.v = VectorField::constant(grid, v, Variance::contravariant);
  out.mean_fisher = mean_f;
  out.mean_prior_information = mean_g;
  BoundReport& r = out.report;
  r.A = mean_u.dot(v);
  r.F = v.dot(mean_f * v);
  r.P = v.dot(mean_g * v);
  r.n = n;
  r.B = r.A;  // <u>^T (n<F> + <G>)^{-1} <u>
  r.v_choice = "van-trees";
  r.contravariant = false;
  r.boundary_residual = boundary_residual(model.prior(), out.v);
  r.grid = grid.describe();
  return out;
}

BoundReport vectoral_bound(const StatisticalModel& model, const VectoralWeight& weights, double n) {
  const auto& grid = model.grid();
  const int q = weights.gamma.rows();
  if (q < 1 || q > grid.dim())
    throw InvalidArgument("vectoral_bound: need 1 <= q <= p weight components");
  if (static_cast<int>(weights.u.size()) != q || static_cast<int>(weights.v.size()) != q)
    throw InvalidArgument("vectoral_bound: need q fields u^j and q fields v_j");
  require_same_grid(grid, weights.gamma.grid(), "vectoral_bound gamma");
  weights.gamma.require_positive_definite("vectoral weight gamma");
  require_prior_ready(model);

  double residual = 0.0;
  for (int j = 0; j < q; ++j) {
    require_same_grid(grid, weights.u[j].grid(), "vectoral_bound u");
    require_same_grid(grid, weights.v[j].grid(), "vectoral_bound v");
    if (weights.u[j].variance() != Variance::covariant ||
        weights.v[j].variance() != Variance::contravariant)
      throw InvalidArgument("vectoral_bound: u^j must be covariant and v_j contravariant");
    double r = 0.0;
    require_boundary_vanishing(model.prior(), weights.v[j], r);
    residual = std::max(residual, r);
  }

  std::vector<Mat> gamma_inv(grid.size());
  for (Index i = 0; i < grid.size(); ++i) gamma_inv[i] = weights.gamma[i].inverse();

  const Vec w = quadrature_weights(model);
  BoundReport r;
  for (Index i = 0; i < grid.size(); ++i) {
    const Mat& f = model.fisher()[i];
    for (int j = 0; j < q; ++j) {
      const Vec vj = weights.v[j].at(i);
      r.A += w[i] * vj.dot(weights.u[j].at(i));
      for (int k = 0; k < q; ++k) r.F += w[i] * gamma_inv[i](j, k) * vj.dot(f * weights.v[k].at(i));
    }
  }

  CellDivergence cd(half_density(model.prior()), model.metric());
  std::vector<Vec> d(q);
  for (int j = 0; j < q; ++j) d[j] = cd.apply(weights.v[j]);
  Vec comp(grid.size());
  for (int j = 0; j < q; ++j) {
    for (int k = 0; k < q; ++k) {
      for (Index i = 0; i < grid.size(); ++i) comp[i] = gamma_inv[i](j, k);
      const Vec gc = cd.cell_average(comp);
      r.P += cd.cell_weights().dot(gc.cwiseProduct(d[j]).cwiseProduct(d[k]));
    }
  }

  const double denom = n * r.F + r.P;
  if (!(denom > 0.0))
    throw SingularError("degenerate direction: no information and no prior curvature");
  r.n = n;
  r.B = r.A * r.A / denom;
  r.v_choice = "vectoral";
  r.boundary_residual = residual;
  r.grid = grid.describe();
  return r;
}

}  // namespace bcrb
