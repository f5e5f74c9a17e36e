#include "bcrb/wave_minimax.hpp"

#include "bcrb/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>

#include <cmath>
#include <numeric>
#include <sstream>

namespace bcrb {

namespace {

// Least-squares slope and intercept of y against x.
std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const double nx = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / nx;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / nx;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

}  // namespace

// ---------------------------------------------------------------------------
// Problem setup
// ---------------------------------------------------------------------------

SchrodingerProblem SchrodingerProblem::line(double lo, double hi, int nodes,
                                            const std::function<double(double)>& f, double a) {
  SchrodingerProblem p;
  p.grid = ParameterGrid::line(lo, hi, nodes);
  p.potential.resize(p.grid.size());
  for (Index i = 0; i < p.grid.size(); ++i) p.potential[i] = f(p.grid.coord(i, 0));
  p.direction = Vec::Ones(1);
  p.a = a;
  return p;
}

SchrodingerProblem SchrodingerProblem::from_model(const StatisticalModel& model,
                                                  const VectorField& v) {
  require_same_grid(model.grid(), v.grid(), "SchrodingerProblem::from_model");
  if (v.variance() != Variance::contravariant)
    throw InvalidArgument("SchrodingerProblem: v must be contravariant");
  const auto& grid = model.grid();
  const Vec v0 = v.at(0);
  const double vscale = std::max(v.values().cwiseAbs().maxCoeff(), 1e-300);
  if ((v.values().rowwise() - v0.transpose()).cwiseAbs().maxCoeff() > 1e-12 * vscale)
    throw InvalidArgument(
        "SchrodingerProblem: v is not constant; only the constant-v wave equation is implemented");
  for (Index i = 0; i < grid.size(); ++i)
    if ((model.metric()[i] - Mat::Identity(grid.dim(), grid.dim())).cwiseAbs().maxCoeff() > 1e-12)
      throw InvalidArgument("SchrodingerProblem: the wave equation path requires a flat metric");

  SchrodingerProblem p;
  p.grid = grid;
  p.direction = v0;
  p.potential.resize(grid.size());
  p.a_field.resize(grid.size());
  for (Index i = 0; i < grid.size(); ++i) {
    p.potential[i] = v0.dot(model.fisher()[i] * v0);
    p.a_field[i] = v0.dot(model.weight().at(i));
  }
  p.a = p.a_field[0];
  const double ascale = std::max(p.a_field.cwiseAbs().maxCoeff(), 1e-300);
  if ((p.a_field.array() - p.a).abs().maxCoeff() <= 1e-12 * ascale) p.a_field.resize(0);
  return p;
}

// ---------------------------------------------------------------------------
// Hamiltonian
// ---------------------------------------------------------------------------

Hamiltonian::Hamiltonian(ParameterGrid grid, SparseMat energy, Vec weights)
    : grid_(std::move(grid)), energy_(std::move(energy)), weights_(std::move(weights)) {
  std::vector<Index> position(grid_.size(), -1);
  for (Index i = 0; i < grid_.size(); ++i)
    if (!grid_.is_boundary(i)) {
      position[i] = static_cast<Index>(interior_.size());
      interior_.push_back(i);
    }
  const double node_weight = grid_.cell_volume();
  std::vector<Eigen::Triplet<double>> triplets;
  for (Index col = 0; col < energy_.outerSize(); ++col) {
    if (position[col] < 0) continue;
    for (SparseMat::InnerIterator it(energy_, col); it; ++it)
      if (position[it.row()] >= 0)
        triplets.emplace_back(position[it.row()], position[col], it.value() / node_weight);
  }
  const Index n = static_cast<Index>(interior_.size());
  matrix_.resize(n, n);
  matrix_.setFromTriplets(triplets.begin(), triplets.end());
}

double Hamiltonian::norm() const {
  Vec row = Vec::Zero(matrix_.rows());
  for (Index col = 0; col < matrix_.outerSize(); ++col)
    for (SparseMat::InnerIterator it(matrix_, col); it; ++it) row[it.row()] += std::abs(it.value());
  return row.size() ? row.maxCoeff() : 0.0;
}

Hamiltonian assemble_H(const SchrodingerProblem& problem, double n) {
  const auto& grid = problem.grid;
  const int p = grid.dim();
  if (problem.potential.size() != grid.size())
    throw InvalidArgument("assemble_H: potential has the wrong size");
  if (problem.direction.size() != p) throw InvalidArgument("assemble_H: direction has the wrong size");
  if (problem.potential.minCoeff() < 0.0)
    throw InvalidArgument("assemble_H: the potential n F must be nonnegative");
  if (!(n >= 0.0)) throw InvalidArgument("assemble_H: n must be nonnegative");

  Vec weights(grid.size());
  for (Index i = 0; i < grid.size(); ++i) weights[i] = grid.trapezoid_weight(i);

  std::vector<Eigen::Triplet<double>> triplets;
  for (Index i = 0; i < grid.size(); ++i)
    if (problem.potential[i] != 0.0)
      triplets.emplace_back(i, i, n * weights[i] * problem.potential[i]);

  // Directional difference (v.d psi) at cell centers from the 2^p corners.
  const int corners = 1 << p;
  std::vector<Index> offset(corners, 0);
  std::vector<double> coeff(corners, 0.0);
  for (int k = 0; k < corners; ++k) {
    for (int a = 0; a < p; ++a) {
      const double sign = (k & (1 << a)) ? 1.0 : -1.0;
      if (k & (1 << a)) offset[k] += grid.stride(a);
      coeff[k] += sign * problem.direction[a] * 2.0 / (corners * grid.spacing(a));
    }
  }
  const double cell_weight = problem.kinetic * grid.cell_volume();
  if (cell_weight != 0.0) {
    for (Index c = 0; c < grid.cell_count(); ++c) {
      const Index base = grid.cell_base_node(c);
      for (int k = 0; k < corners; ++k)
        for (int l = 0; l < corners; ++l) {
          const double value = cell_weight * coeff[k] * coeff[l];
          if (value != 0.0) triplets.emplace_back(base + offset[k], base + offset[l], value);
        }
    }
  }
  SparseMat energy(grid.size(), grid.size());
  energy.setFromTriplets(triplets.begin(), triplets.end());
  return Hamiltonian(grid, std::move(energy), std::move(weights));
}

double norm_squared(const Hamiltonian& h, const Vec& psi) {
  return psi.cwiseProduct(h.weights()).dot(psi);
}

double energy(const Hamiltonian& h, const Vec& psi) {
  if (psi.size() != h.grid().size()) throw InvalidArgument("energy: psi has the wrong size");
  return psi.dot(h.energy_form() * psi) / norm_squared(h, psi);
}

// ---------------------------------------------------------------------------
// Ground state
// ---------------------------------------------------------------------------

namespace {

GroundState finish(const Hamiltonian& h, const Vec& x, double e, double residual, int iterations,
                   const std::string& method) {
  GroundState gs;
  gs.energy = e;
  gs.residual = residual;
  gs.iterations = iterations;
  gs.method = method;
  gs.psi = Vec::Zero(h.grid().size());
  const double sign = x.sum() >= 0 ? 1.0 : -1.0;
  for (std::size_t k = 0; k < h.interior().size(); ++k) gs.psi[h.interior()[k]] = sign * x[k];
  gs.psi /= std::sqrt(norm_squared(h, gs.psi));
  return gs;
}

GroundState dense_ground_state(const Hamiltonian& h, double hnorm) {
  const Mat dense = Mat(h.matrix());
  Eigen::SelfAdjointEigenSolver<Mat> es(dense);
  if (es.info() != Eigen::Success) throw ConvergenceError("ground_state: dense eigensolver failed");
  const Vec x = es.eigenvectors().col(0);
  const double e = es.eigenvalues()[0];
  const double residual = (h.matrix() * x - e * x).norm() / std::max(hnorm, 1e-300);
  return finish(h, x, e, residual, 0, "dense");
}

}  // namespace

GroundState ground_state(const Hamiltonian& h) {
  const SparseMat& m = h.matrix();
  const Index size = m.rows();
  if (size == 0) throw InvalidArgument("ground_state: no interior nodes");
  const double hnorm = h.norm();
  const double tol = 1e-8;

  // Gershgorin lower bound keeps H - sigma positive definite.
  Vec lower = m.diagonal();
  for (Index col = 0; col < m.outerSize(); ++col)
    for (SparseMat::InnerIterator it(m, col); it; ++it)
      if (it.row() != col) lower[it.row()] -= std::abs(it.value());
  const double gersh = lower.minCoeff();
  const double sigma = gersh - 1e-10 * std::max(1.0, std::abs(gersh));

  SparseMat shifted = m;
  for (Index i = 0; i < size; ++i) shifted.coeffRef(i, i) -= sigma;
  Eigen::SimplicialLDLT<SparseMat> ldlt(shifted);

  std::ostringstream diag;
  if (ldlt.info() == Eigen::Success) {
    Vec x = Vec::Ones(size).normalized();
    double e = x.dot(m * x), residual = 0.0;
    const int max_iterations = 5000;
    for (int it = 1; it <= max_iterations; ++it) {
      x = ldlt.solve(x);
      x.normalize();
      const Vec hx = m * x;
      e = x.dot(hx);
      residual = (hx - e * x).norm() / std::max(hnorm, 1e-300);
      if (!std::isfinite(residual)) break;
      if (residual <= tol) return finish(h, x, e, residual, it, "inverse-iteration");
    }
    diag << "inverse iteration stopped at residual " << residual << " after " << max_iterations
         << " iterations (shift " << sigma << ", estimate " << e << ")";
  } else {
    diag << "factorization of H - sigma failed (sigma " << sigma << ")";
  }
  if (size <= 2000) {
    GroundState gs = dense_ground_state(h, hnorm);
    if (gs.residual <= tol) return gs;
    diag << "; dense fallback residual " << gs.residual;
  }
  throw ConvergenceError("ground_state: " + diag.str());
}

WorstCase bworst(const SchrodingerProblem& problem, double n) {
  const Hamiltonian h = assemble_H(problem, n);
  WorstCase out;
  out.ground = ground_state(h);
  if (!(out.ground.energy > 1e-12 * h.norm()))
    throw SingularError("bworst: ground-state energy is not positive; the bound degenerates");
  out.b_worst = problem.a * problem.a / out.ground.energy;
  out.prior = ScalarField(problem.grid, out.ground.psi.cwiseProduct(out.ground.psi));
  return out;
}

Functionals wave_functionals(const ScalarField& psi, const VectorField& v,
                             const StatisticalModel& model) {
  require_same_grid(model.grid(), psi.grid(), "wave_functionals");
  require_same_grid(model.grid(), v.grid(), "wave_functionals");
  if (v.variance() != Variance::contravariant)
    throw InvalidArgument("wave_functionals: v must be contravariant");
  const auto& grid = model.grid();
  const ScalarField rho(grid, psi.values().cwiseProduct(psi.values()));
  const double mass = integrate(rho, model.metric());
  if (std::abs(mass - 1.0) > 1e-10) {
    std::ostringstream os;
    os << "wave_functionals: <psi, psi> = " << mass << ", expected 1";
    throw InvalidArgument(os.str());
  }
  Functionals out;
  out.boundary_residual = boundary_residual(rho, v);
  if (out.boundary_residual > kBoundaryTolerance)
    throw BoundaryError("wave_functionals: psi^2 v does not vanish on the boundary");
  const ScalarField sg = sqrt_det(model.metric());
  for (Index i = 0; i < grid.size(); ++i) {
    const double w = grid.trapezoid_weight(i) * sg[i] * rho[i];
    const Vec vi = v.at(i);
    out.A += w * vi.dot(model.weight().at(i));
    out.F += w * vi.dot(model.fisher()[i] * vi);
  }
  CellDivergence cd(psi, model.metric());
  const Vec d = cd.apply(v);
  out.P = cd.cell_weights().dot(d.cwiseProduct(d));
  return out;
}

// ---------------------------------------------------------------------------
// Rates
// ---------------------------------------------------------------------------

std::pair<double, double> trial_energy(const std::function<double(double)>& potential, double n,
                                       double w_guess) {
  using boost::math::quadrature::gauss_kronrod;
  const double norm2 = 4.0 / 3.0;
  auto potential_term = [&](double w) {
    auto integrand = [&](double y) {
      const double c = std::cos(M_PI * y / 2);
      return potential(w * y) * norm2 * c * c * c * c;
    };
    return gauss_kronrod<double, 31>::integrate(integrand, -1.0, 0.0, 10, 1e-12) +
           gauss_kronrod<double, 31>::integrate(integrand, 0.0, 1.0, 10, 1e-12);
  };
  auto total = [&](double log_w) {
    const double w = std::exp(log_w);
    return n * potential_term(w) + 4.0 * M_PI * M_PI / (3.0 * w * w);
  };
  const double center = std::log(w_guess);
  const auto best = boost::math::tools::brent_find_minima(total, center - 6.0, center + 6.0, 40);
  return {best.second, std::exp(best.first)};
}

RateFit rate_fit(const std::function<double(double)>& potential, const std::vector<double>& n_list,
                 const RateOptions& options) {
  if (n_list.size() < 3) throw InvalidArgument("rate_fit: need at least three n values");
  std::vector<double> ns = n_list;
  std::sort(ns.begin(), ns.end());
  if (!(ns.front() > 0.0)) throw InvalidArgument("rate_fit: n values must be positive");
  if (ns.back() / ns.front() < 1e3 * (1 - 1e-12))
    throw InvalidArgument("rate_fit: n_list must span at least three decades");
  if (options.exponent < 0.0 || !(options.amplitude > 0.0))
    throw InvalidArgument("rate_fit: need exponent >= 0 and a positive amplitude");

  RateFit fit;
  std::vector<double> log_n, log_b, log_trial, log_w;
  for (double n : ns) {
    const double width = std::pow(4.0 / (n * options.amplitude), 1.0 / (options.exponent + 2.0));
    const double h = width / options.nodes_per_width;
    double half = options.initial_half_width * width;
    double previous = 0.0;
    RateRow row;
    row.n = n;
    for (int k = 0; k <= options.max_doublings; ++k) {
      const int nodes = 2 * static_cast<int>(std::lround(half / h)) + 1;
      const auto problem = SchrodingerProblem::line(-half, half, nodes, potential, options.a);
      const double e = ground_state(assemble_H(problem, n)).energy;
      row.e_min = e;
      row.half_width = half;
      row.nodes = nodes;
      if (k > 0 && std::abs(e - previous) <= options.doubling_tolerance * std::abs(e)) break;
      previous = e;
      half *= 2.0;
    }
    row.b_worst = options.a * options.a / row.e_min;
    const auto trial = trial_energy(potential, n, width);
    row.e_trial = trial.first;
    row.w_opt = trial.second;
    fit.rows.push_back(row);
    log_n.push_back(std::log(n));
    log_b.push_back(std::log(row.b_worst));
    log_trial.push_back(std::log(row.e_trial));
    log_w.push_back(std::log(row.w_opt));
  }
  std::tie(fit.slope, fit.intercept) = linear_fit(log_n, log_b);
  fit.trial_slope = linear_fit(log_n, log_trial).first;
  fit.width_exponent = linear_fit(log_n, log_w).first;
  return fit;
}

LambdaScan lambda_scan(const SchrodingerProblem& problem, double n, double lambda_min,
                       double lambda_max) {
  const Hamiltonian h = assemble_H(problem, n);
  const auto& grid = problem.grid;
  Vec a = problem.a_field.size() ? problem.a_field : Vec::Constant(grid.size(), problem.a);
  if (a.size() != grid.size()) throw InvalidArgument("lambda_scan: A field has the wrong size");
  const auto& interior = h.interior();
  const Index size = static_cast<Index>(interior.size());
  if (size > 4000) throw InvalidArgument("lambda_scan: at most 4000 interior nodes are supported");
  Vec scale(size);
  for (Index k = 0; k < size; ++k) {
    const double ak = a[interior[k]];
    if (!(ak > 0.0))
      throw InvalidArgument(
          "lambda_scan: A must be strictly positive (sign-indefinite A is not elliptic)");
    scale[k] = 1.0 / std::sqrt(h.weights()[interior[k]] * ak);
  }
  // Generalized problem K psi = lambda diag(w A) psi, reduced symmetrically.
  const double node_weight = grid.cell_volume();
  const Mat k = Mat(h.matrix()) * node_weight;
  const Mat c = scale.asDiagonal() * k * scale.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Mat> es(c);
  if (es.info() != Eigen::Success) throw ConvergenceError("lambda_scan: eigensolver failed");

  LambdaScan out;
  out.bound = -1.0;
  for (Index j = 0; j < size; ++j) {
    const double lambda = es.eigenvalues()[j];
    if (!(lambda > 0.0) || lambda < lambda_min || lambda > lambda_max) continue;
    Vec psi = Vec::Zero(grid.size());
    const Vec y = scale.cwiseProduct(es.eigenvectors().col(j));
    for (Index m = 0; m < size; ++m) psi[interior[m]] = y[m];
    psi /= std::sqrt(norm_squared(h, psi));
    double expect_a = 0.0;
    for (Index i = 0; i < grid.size(); ++i) expect_a += h.weights()[i] * a[i] * psi[i] * psi[i];
    const double b = expect_a / lambda;
    out.table.emplace_back(lambda, b);
    if (b > out.bound) {
      out.bound = b;
      out.lambda = lambda;
    }
  }
  if (out.table.empty()) throw InvalidArgument("lambda_scan: no eigenvalue inside the lambda window");
  return out;
}

}  // namespace bcrb
