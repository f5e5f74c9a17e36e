#include "bcrb/optimal_field.hpp"

#include "bcrb/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/LU>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <sstream>

namespace bcrb {

namespace {

OperatorL assemble_generic(const StatisticalModel& model, double n,
                           const std::vector<Mat>& gamma_inv) {
  if (!(n >= 0.0)) throw InvalidArgument("assemble_L: n must be nonnegative");
  const auto& grid = model.grid();
  const int p = grid.dim();
  const int q = static_cast<int>(gamma_inv.front().rows());
  const int bs = p * q;
  const ScalarField& rho = model.prior();
  require_density_floor(rho, "assemble_L");
  if (rho.values().minCoeff() < 0.0) throw InvalidArgument("assemble_L: negative prior density");

  const ScalarField sg = sqrt_det(model.metric());
  Vec mass(grid.size());
  for (Index i = 0; i < grid.size(); ++i) mass[i] = grid.trapezoid_weight(i) * sg[i] * rho[i];

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(grid.size()) * bs * bs * 4);
  for (Index i = 0; i < grid.size(); ++i) {
    const Mat& f = model.fisher()[i];
    for (int j = 0; j < q; ++j)
      for (int k = 0; k < q; ++k) {
        const double c = n * mass[i] * gamma_inv[i](j, k);
        if (c == 0.0) continue;
        for (int a = 0; a < p; ++a)
          for (int b = 0; b < p; ++b)
            if (f(a, b) != 0.0)
              triplets.emplace_back((i * q + j) * p + a, (i * q + k) * p + b, c * f(a, b));
      }
  }

  const Vec psi = rho.values().cwiseMax(0.0).cwiseSqrt();
  CellDivergence cd(ScalarField(grid, psi), model.metric());
  const SparseMat& d = cd.matrix();
  const SparseMat dt = d.transpose();
  Vec comp(grid.size());
  for (int j = 0; j < q; ++j) {
    for (int k = 0; k < q; ++k) {
      for (Index i = 0; i < grid.size(); ++i) comp[i] = gamma_inv[i](j, k);
      const Vec w = cd.cell_weights().cwiseProduct(cd.cell_average(comp));
      const SparseMat wd = w.asDiagonal() * d;
      const SparseMat block = dt * wd;
      for (Index col = 0; col < block.outerSize(); ++col) {
        for (SparseMat::InnerIterator it(block, col); it; ++it) {
          const Index r = it.row(), c = it.col();
          triplets.emplace_back((r / p * q + j) * p + r % p, (c / p * q + k) * p + c % p, it.value());
        }
      }
    }
  }
  SparseMat gram(grid.size() * bs, grid.size() * bs);
  gram.setFromTriplets(triplets.begin(), triplets.end());
  gram.makeCompressed();
  return OperatorL(grid, n, q, std::move(gram), std::move(mass));
}

std::string residual_text(double r) {
  std::ostringstream os;
  os << r;
  return os.str();
}

}  // namespace

OperatorL::OperatorL(const ParameterGrid& grid, double n, int components, SparseMat gram, Vec mass)
    : grid_(grid), n_(n), components_(components), gram_(std::move(gram)), mass_(std::move(mass)) {
  const int bs = block_size();
  for (Index i = 0; i < grid_.size(); ++i)
    if (!grid_.is_boundary(i))
      for (int k = 0; k < bs; ++k) free_.push_back(i * bs + k);
}

Vec OperatorL::apply(const Vec& v_flat) const {
  if (v_flat.size() != gram_.cols()) throw InvalidArgument("OperatorL::apply: size mismatch");
  Vec out = gram_ * v_flat;
  const int bs = block_size();
  for (Index i = 0; i < grid_.size(); ++i)
    for (int k = 0; k < bs; ++k) out[i * bs + k] = mass_[i] > 0 ? out[i * bs + k] / mass_[i] : 0.0;
  return out;
}

VectorField OperatorL::apply(const VectorField& v) const {
  require_same_grid(grid_, v.grid(), "OperatorL::apply");
  if (components_ != 1) throw InvalidArgument("OperatorL::apply: vectoral operator needs flat input");
  if (v.variance() != Variance::contravariant)
    throw InvalidArgument("OperatorL::apply: v must be contravariant");
  return VectorField::from_flat(grid_, apply(v.flat()), Variance::covariant);
}

double OperatorL::inner(const Vec& w_flat, const Vec& v_flat) const {
  const int bs = block_size();
  double sum = 0.0;
  for (Index i = 0; i < grid_.size(); ++i)
    sum += mass_[i] * w_flat.segment(i * bs, bs).dot(v_flat.segment(i * bs, bs));
  return sum;
}

double OperatorL::norm_bound() const {
  Vec row_sum = Vec::Zero(gram_.rows());
  for (Index col = 0; col < gram_.outerSize(); ++col)
    for (SparseMat::InnerIterator it(gram_, col); it; ++it) row_sum[it.row()] += std::abs(it.value());
  const int bs = block_size();
  double out = 0.0;
  for (Index i = 0; i < grid_.size(); ++i)
    if (mass_[i] > 0)
      out = std::max(out, row_sum.segment(i * bs, bs).maxCoeff() / mass_[i]);
  return out;
}

OperatorL assemble_L(const StatisticalModel& model, double n) {
  return assemble_generic(model, n, std::vector<Mat>(model.grid().size(), Mat::Ones(1, 1)));
}

OperatorL assemble_vectoral_L(const StatisticalModel& model, const MatrixField& gamma, double n) {
  require_same_grid(model.grid(), gamma.grid(), "assemble_vectoral_L");
  gamma.require_positive_definite("vectoral weight gamma");
  if (gamma.rows() < 1 || gamma.rows() > model.dim())
    throw InvalidArgument("assemble_vectoral_L: need 1 <= q <= p");
  std::vector<Mat> inv(gamma.grid().size());
  for (Index i = 0; i < gamma.grid().size(); ++i) inv[i] = gamma[i].inverse();
  return assemble_generic(model, n, inv);
}

SolveResult solve_flat(const OperatorL& op, const Vec& u_flat) {
  const SparseMat& m = op.gram();
  if (u_flat.size() != m.rows()) throw InvalidArgument("solve_flat: u has the wrong size");
  const auto& free = op.free_dofs();
  const int bs = op.block_size();
  const Index nf = static_cast<Index>(free.size());

  std::vector<Index> position(m.rows(), -1);
  for (Index k = 0; k < nf; ++k) position[free[k]] = k;

  Vec b(nf);
  for (Index k = 0; k < nf; ++k) b[k] = op.mass()[free[k] / bs] * u_flat[free[k]];

  SolveResult result;
  result.v = Vec::Zero(m.rows());
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    result.method = "trivial";
    return result;
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(m.nonZeros());
  for (Index col = 0; col < m.outerSize(); ++col) {
    const Index c = position[col];
    if (c < 0) continue;
    for (SparseMat::InnerIterator it(m, col); it; ++it) {
      const Index r = position[it.row()];
      if (r >= 0) triplets.emplace_back(r, c, it.value());
    }
  }
  SparseMat mff(nf, nf);
  mff.setFromTriplets(triplets.begin(), triplets.end());

  Vec scale(nf);
  const Vec diag = mff.diagonal();
  for (Index k = 0; k < nf; ++k) {
    if (!(diag[k] > 0.0))
      throw SingularError("L has a vanishing diagonal entry; the operator is singular");
    scale[k] = 1.0 / std::sqrt(diag[k]);
  }
  const SparseMat scaled = scale.asDiagonal() * mff * scale.asDiagonal();

  Vec x = Vec::Zero(nf);
  const bool direct = op.grid().dim() <= 2;
  if (direct) {
    Eigen::SimplicialLDLT<SparseMat> ldlt(scaled);
    if (ldlt.info() != Eigen::Success)
      throw SingularError("L factorization failed; the operator is singular along u");
    for (int step = 0; step < 4; ++step) {
      const Vec r = b - mff * x;
      if (r.norm() <= 1e-14 * bnorm) break;
      x += scale.cwiseProduct(ldlt.solve(scale.cwiseProduct(r)));
      result.iterations = step + 1;
    }
    result.method = "sparse-ldlt";
  } else {
    Eigen::ConjugateGradient<SparseMat, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg;
    cg.setTolerance(1e-12);
    cg.setMaxIterations(static_cast<int>(std::max<Index>(1000, 20 * nf)));
    cg.compute(scaled);
    x = scale.cwiseProduct(cg.solve(scale.cwiseProduct(b)));
    result.iterations = static_cast<int>(cg.iterations());
    result.method = "pcg";
  }

  result.residual = (mff * x - b).norm() / bnorm;
  if (!std::isfinite(result.residual) || result.residual > kRangeTolerance)
    throw RangeError("u does not lie in the range of L (relative residual " +
                     residual_text(result.residual) +
                     "); the optimal bound for this case is an open problem");
  if (result.residual > kSolveTolerance)
    throw ConvergenceError("L v = u solve stalled at relative residual " +
                           residual_text(result.residual) + " using " + result.method);
  for (Index k = 0; k < nf; ++k) result.v[free[k]] = x[k];
  return result;
}

VectorField solve_least_favorable(const OperatorL& op, const VectorField& u) {
  require_same_grid(op.grid(), u.grid(), "solve_least_favorable");
  if (op.components() != 1)
    throw InvalidArgument("solve_least_favorable: vectoral operator needs flat input");
  if (u.variance() != Variance::covariant)
    throw InvalidArgument("solve_least_favorable: u must be covariant");
  return VectorField::from_flat(op.grid(), solve_flat(op, u.flat()).v, Variance::contravariant);
}

OptimalResult bmax(const StatisticalModel& model, double n) {
  const OperatorL op = assemble_L(model, n);
  const Vec u = model.weight().flat();
  const SolveResult sol = solve_flat(op, u);
  OptimalResult out;
  out.v.push_back(VectorField::from_flat(model.grid(), sol.v, Variance::contravariant));
  out.residual = sol.residual;
  out.solver = sol.method;
  BoundReport& r = out.report;
  const Functionals f = functionals(model, out.v.front());
  r.A = f.A;
  r.F = f.F;
  r.P = f.P;
  r.n = n;
  r.B = op.inner(u, sol.v);
  r.v_choice = "optimal";
  r.boundary_residual = f.boundary_residual;
  r.grid = model.grid().describe();
  return out;
}

OptimalResult vectoral_bmax(const StatisticalModel& model, const VectoralWeight& weights, double n) {
  const OperatorL op = assemble_vectoral_L(model, weights.gamma, n);
  const auto& grid = model.grid();
  const int p = grid.dim();
  const int q = op.components();
  if (static_cast<int>(weights.u.size()) != q)
    throw InvalidArgument("vectoral_bmax: need one weight field u^j per gamma component");
  Vec u(grid.size() * q * p);
  for (int j = 0; j < q; ++j) {
    require_same_grid(grid, weights.u[j].grid(), "vectoral_bmax u");
    if (weights.u[j].variance() != Variance::covariant)
      throw InvalidArgument("vectoral_bmax: u^j must be covariant");
    for (Index i = 0; i < grid.size(); ++i)
      for (int a = 0; a < p; ++a) u[(i * q + j) * p + a] = weights.u[j].values()(i, a);
  }
  const SolveResult sol = solve_flat(op, u);

  OptimalResult out;
  for (int j = 0; j < q; ++j) {
    Mat values(grid.size(), p);
    for (Index i = 0; i < grid.size(); ++i)
      for (int a = 0; a < p; ++a) values(i, a) = sol.v[(i * q + j) * p + a];
    out.v.emplace_back(grid, std::move(values), Variance::contravariant);
  }
  out.residual = sol.residual;
  out.solver = sol.method;

  const double b = op.inner(u, sol.v);
  if (b > 0.0) {
    out.report = vectoral_bound(model, VectoralWeight{weights.gamma, weights.u, out.v}, n);
  } else {
    out.report.n = n;
    out.report.grid = grid.describe();
  }
  out.report.B = b;
  out.report.v_choice = "optimal-vectoral";
  return out;
}

double gaussian_closed_form(const Mat& f, const Mat& g, const Vec& u, double n) {
  if (f.rows() != f.cols() || g.rows() != f.rows() || g.cols() != f.cols() || u.size() != f.rows())
    throw InvalidArgument("gaussian_closed_form: dimension mismatch");
  const Mat m = n * f + g;
  Eigen::LLT<Mat> llt(0.5 * (m + m.transpose()));
  if (llt.info() != Eigen::Success)
    throw SingularError("gaussian_closed_form: nF + G is not positive definite");
  return u.dot(llt.solve(u));
}

}  // namespace bcrb
