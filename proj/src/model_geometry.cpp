#include "bcrb/model_geometry.hpp"

#include "bcrb/errors.hpp"
#include "bcrb/gl_bounds.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <sstream>

namespace bcrb {

namespace {

std::string format_point(const Vec& x) {
  std::ostringstream os;
  os.precision(10);
  os << "(";
  for (Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ")";
  return os.str();
}

void require_psd(const MatrixField& f, const std::string& what) {
  for (Index i = 0; i < f.grid().size(); ++i) {
    Eigen::SelfAdjointEigenSolver<Mat> es(f[i], Eigen::EigenvaluesOnly);
    const double trace = f[i].trace();
    if (es.eigenvalues().minCoeff() < -1e-10 * std::max(std::abs(trace), 1e-300)) {
      throw InvalidArgument(what + " is not positive semidefinite at theta = " +
                            format_point(f.grid().coords(i)));
    }
  }
}

// Map a target node back into the source box, absorbing round-off at the edges.
Vec pull_back(const Diffeomorphism& map, const ParameterGrid& source, const Vec& target_point) {
  Vec theta = map.inverse(target_point);
  for (int a = 0; a < source.dim(); ++a) {
    const double tol = 1e-8 * (source.upper(a) - source.lower(a));
    if (theta[a] < source.lower(a) - tol || theta[a] > source.upper(a) + tol)
      throw InvalidArgument("map sends " + format_point(target_point) + " outside the source box " +
                            source.describe());
    theta[a] = std::clamp(theta[a], source.lower(a), source.upper(a));
  }
  return theta;
}

std::vector<double> fd_steps(const ParameterGrid& grid) {
  std::vector<double> steps(grid.dim());
  for (int a = 0; a < grid.dim(); ++a) steps[a] = 1e-6 * (grid.upper(a) - grid.lower(a));
  return steps;
}

Mat jacobian_checked(const Diffeomorphism& map, const Vec& theta, const std::vector<double>& steps) {
  Mat j = map.jacobian_at(theta, steps);
  const double det = j.determinant();
  const double scale = std::pow(std::max(j.cwiseAbs().maxCoeff(), 1e-300), j.rows());
  if (!std::isfinite(det) || std::abs(det) <= 1e-12 * scale || det == 0.0)
    throw SingularError("singular Jacobian of map '" + map.name + "' at theta = " +
                        format_point(theta));
  return j;
}

Mat interpolate_matrix(const MatrixField& field, const Vec& point) {
  const int r = field.rows();
  const auto& grid = field.grid();
  Mat out(r, r);
  Vec comp(grid.size());
  for (int a = 0; a < r; ++a) {
    for (int b = a; b < r; ++b) {
      for (Index i = 0; i < grid.size(); ++i) comp[i] = field[i](a, b);
      out(a, b) = out(b, a) = interpolate_cubic(grid, comp, point);
    }
  }
  return out;
}

Vec interpolate_vector(const VectorField& field, const Vec& point) {
  Vec out(field.components());
  for (int a = 0; a < field.components(); ++a)
    out[a] = interpolate_cubic(field.grid(), field.values().col(a), point);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// StatisticalModel
// ---------------------------------------------------------------------------

StatisticalModel::StatisticalModel(MatrixField fisher, VectorField weight, MatrixField metric,
                                   std::optional<ScalarField> prior)
    : fisher_(std::move(fisher)),
      weight_(std::move(weight)),
      metric_(std::move(metric)),
      prior_(std::move(prior)) {
  const auto& g = fisher_.grid();
  require_same_grid(g, weight_.grid(), "StatisticalModel weight");
  require_same_grid(g, metric_.grid(), "StatisticalModel metric");
  if (fisher_.rows() != g.dim() || metric_.rows() != g.dim())
    throw InvalidArgument("StatisticalModel: Fisher and metric must be p x p");
  if (weight_.variance() != Variance::covariant)
    throw InvalidArgument("StatisticalModel: weight field u must be covariant");
  require_psd(fisher_, "Fisher information");
  metric_.require_positive_definite("metric");
  if (prior_) {
    require_same_grid(g, prior_->grid(), "StatisticalModel prior");
    if (prior_->values().minCoeff() < 0.0)
      throw InvalidArgument("StatisticalModel: prior density is negative somewhere");
    const double mass = integrate(*prior_, metric_);
    if (std::abs(mass - 1.0) > 1e-8) {
      std::ostringstream os;
      os << "StatisticalModel: prior integrates to " << mass << ", expected 1";
      throw InvalidArgument(os.str());
    }
  }
}

StatisticalModel StatisticalModel::from_functions(const ParameterGrid& grid,
                                                  ModelFunctions functions) {
  if (!functions.fisher || !functions.weight)
    throw InvalidArgument("StatisticalModel::from_functions: fisher and weight are required");
  auto fisher = MatrixField::from_function(grid, functions.fisher);
  auto weight = VectorField::from_function(grid, functions.weight, Variance::covariant);
  auto metric = functions.metric ? MatrixField::from_function(grid, functions.metric)
                                 : MatrixField::identity(grid);
  std::optional<ScalarField> prior;
  if (functions.prior)
    prior = normalized(ScalarField::from_function(grid, functions.prior), metric);
  StatisticalModel model(std::move(fisher), std::move(weight), std::move(metric), std::move(prior));
  model.functions_ = std::move(functions);
  return model;
}

const ScalarField& StatisticalModel::prior() const {
  if (!prior_) throw InvalidArgument("StatisticalModel: no prior attached");
  return *prior_;
}

ScalarField StatisticalModel::prior_density() const {
  const ScalarField sg = sqrt_det(metric_);
  return ScalarField(grid(), prior().values().cwiseProduct(sg.values()));
}

StatisticalModel StatisticalModel::with_prior(ScalarField prior) const {
  StatisticalModel out(fisher_, weight_, metric_, std::move(prior));
  if (functions_) {
    out.functions_ = functions_;
    out.functions_->prior = nullptr;
  }
  return out;
}

StatisticalModel StatisticalModel::with_fisher(MatrixField fisher) const {
  StatisticalModel out(std::move(fisher), weight_, metric_, prior_);
  if (functions_) {
    out.functions_ = functions_;
    out.functions_->fisher = nullptr;
  }
  return out;
}

StatisticalModel StatisticalModel::with_weight(VectorField weight) const {
  StatisticalModel out(fisher_, std::move(weight), metric_, prior_);
  if (functions_) {
    out.functions_ = functions_;
    out.functions_->weight = nullptr;
  }
  return out;
}

ScalarField normalized(const ScalarField& rho, const MatrixField& metric) {
  const double mass = integrate(rho, metric);
  if (!(mass > 0.0) || !std::isfinite(mass))
    throw InvalidArgument("cannot normalize a density with nonpositive mass");
  return ScalarField(rho.grid(), rho.values() / mass);
}

// ---------------------------------------------------------------------------
// Diffeomorphisms
// ---------------------------------------------------------------------------

Mat Diffeomorphism::jacobian_at(const Vec& theta, const std::vector<double>& fd_step) const {
  if (jacobian) return jacobian(theta);
  const Index p = theta.size();
  Mat j(p, p);
  for (Index a = 0; a < p; ++a) {
    Vec plus = theta, minus = theta;
    plus[a] += fd_step[a];
    minus[a] -= fd_step[a];
    j.row(a) = ((forward(plus) - forward(minus)) / (2.0 * fd_step[a])).transpose();
  }
  return j;
}

namespace maps {

Diffeomorphism identity() {
  return {"identity", [](const Vec& x) { return x; }, [](const Vec& x) { return x; },
          [](const Vec& x) { return Mat(Mat::Identity(x.size(), x.size())); }};
}

Diffeomorphism affine(const Vec& scale, const Vec& shift) {
  if (scale.size() != shift.size()) throw InvalidArgument("affine map: size mismatch");
  if ((scale.array() == 0.0).any()) throw SingularError("affine map: zero scale");
  return {"affine",
          [=](const Vec& x) { return Vec(scale.cwiseProduct(x) + shift); },
          [=](const Vec& y) { return Vec((y - shift).cwiseQuotient(scale)); },
          [=](const Vec&) { return Mat(scale.asDiagonal()); }};
}

Diffeomorphism odd_power(int power) {
  if (power < 1 || power % 2 == 0) throw InvalidArgument("odd_power map: power must be odd");
  const double k = power;
  return {"odd-power",
          [=](const Vec& x) { return Vec(x.unaryExpr([=](double t) { return std::pow(t, k); })); },
          [=](const Vec& y) {
            return Vec(y.unaryExpr([=](double t) {
              return std::copysign(std::pow(std::abs(t), 1.0 / k), t);
            }));
          },
          [=](const Vec& x) {
            return Mat(x.unaryExpr([=](double t) { return k * std::pow(t, k - 1); }).asDiagonal());
          }};
}

Diffeomorphism logistic(double center, double width) {
  if (!(width > 0.0)) throw InvalidArgument("logistic map: width must be positive");
  auto f = [=](double t) { return 1.0 / (1.0 + std::exp(-(t - center) / width)); };
  return {"logistic",
          [=](const Vec& x) { return Vec(x.unaryExpr(f)); },
          [=](const Vec& y) {
            return Vec(y.unaryExpr([=](double s) { return center + width * std::log(s / (1.0 - s)); }));
          },
          [=](const Vec& x) {
            return Mat(x.unaryExpr([=](double t) {
                          const double s = f(t);
                          return s * (1.0 - s) / width;
                        }).asDiagonal());
          }};
}

Diffeomorphism linear(const Mat& a) {
  Eigen::FullPivLU<Mat> lu(a);
  if (!lu.isInvertible()) throw SingularError("linear map: matrix is singular");
  const Mat inv = lu.inverse();
  return {"linear", [=](const Vec& x) { return Vec(a * x); }, [=](const Vec& y) { return Vec(inv * y); },
          [=](const Vec&) { return Mat(a.transpose()); }};
}

}  // namespace maps

ParameterGrid image_grid(const ParameterGrid& source, const Diffeomorphism& map) {
  const int p = source.dim();
  Vec lo(p), hi(p);
  for (int a = 0; a < p; ++a) {
    lo[a] = source.lower(a);
    hi[a] = source.upper(a);
  }
  const Vec flo = map.forward(lo), fhi = map.forward(hi);
  std::vector<double> lower(p), upper(p);
  std::vector<int> nodes(p);
  for (int a = 0; a < p; ++a) {
    lower[a] = std::min(flo[a], fhi[a]);
    upper[a] = std::max(flo[a], fhi[a]);
    nodes[a] = source.nodes(a);
  }
  return ParameterGrid(lower, upper, nodes);
}

void validate_map(const ParameterGrid& source, const Diffeomorphism& map) {
  const auto steps = fd_steps(source);
  for (Index i = 0; i < source.size(); ++i) {
    const Vec theta = source.coords(i);
    jacobian_checked(map, theta, steps);
    const Vec back = map.inverse(map.forward(theta));
    if ((back - theta).cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, theta.cwiseAbs().maxCoeff()))
      throw InvalidArgument("map '" + map.name + "' does not invert at theta = " + format_point(theta));
  }
}

PushforwardResult pushforward_model(const StatisticalModel& model, const Diffeomorphism& map,
                                    std::optional<ParameterGrid> target) {
  const ParameterGrid& src = model.grid();
  validate_map(src, map);
  const ParameterGrid tgt = target ? *target : image_grid(src, map);
  const auto steps = fd_steps(src);
  const auto& fn = model.functions();
  const bool analytic_f = fn && fn->fisher;
  const bool analytic_u = fn && fn->weight;
  const bool analytic_g = fn && fn->metric;
  const bool analytic_prior = fn && fn->prior;
  const bool identity_metric = !fn || !fn->metric;

  PushforwardResult result;
  std::vector<Mat> fisher(tgt.size()), metric(tgt.size());
  Mat weight(tgt.size(), tgt.dim());
  Vec prior(model.has_prior() ? tgt.size() : 0);

  for (Index i = 0; i < tgt.size(); ++i) {
    const Vec theta = pull_back(map, src, tgt.coords(i));
    const Mat jt = jacobian_checked(map, theta, steps).inverse();

    const Mat f = analytic_f ? fn->fisher(theta) : interpolate_matrix(model.fisher(), theta);
    const Vec u = analytic_u ? fn->weight(theta) : interpolate_vector(model.weight(), theta);
    Mat g;
    if (analytic_g)
      g = fn->metric(theta);
    else if (identity_metric && fn)
      g = Mat::Identity(src.dim(), src.dim());
    else
      g = interpolate_matrix(model.metric(), theta);

    const Mat ft = jt * f * jt.transpose();
    fisher[i] = 0.5 * (ft + ft.transpose());
    const Mat gt = jt * g * jt.transpose();
    metric[i] = 0.5 * (gt + gt.transpose());
    weight.row(i) = (jt * u).transpose();
    if (model.has_prior())
      prior[i] = analytic_prior ? fn->prior(theta)
                                : interpolate_cubic(src, model.prior().values(), theta);
    result.interpolated = result.interpolated || !analytic_f || !analytic_u ||
                          (!analytic_g && !(identity_metric && fn)) ||
                          (model.has_prior() && !analytic_prior);
  }

  MatrixField metric_field(tgt, std::move(metric));
  std::optional<ScalarField> prior_field;
  if (model.has_prior()) {
    ScalarField raw(tgt, prior.cwiseMax(0.0));
    const double mass = integrate(raw, metric_field);
    result.prior_renormalization = 1.0 / mass;
    prior_field = ScalarField(tgt, raw.values() / mass);
  }
  result.model = StatisticalModel(MatrixField(tgt, std::move(fisher)),
                                  VectorField(tgt, std::move(weight), Variance::covariant),
                                  std::move(metric_field), std::move(prior_field));
  return result;
}

VectorField transform_vector_field(const VectorField& v, const Diffeomorphism& map,
                                   const ParameterGrid& target) {
  if (v.variance() != Variance::contravariant)
    throw InvalidArgument(
        "transform_vector_field: covariant input; the contravariant law does not apply");
  const auto& src = v.grid();
  const auto steps = fd_steps(src);
  Mat out(target.size(), target.dim());
  for (Index i = 0; i < target.size(); ++i) {
    const Vec theta = pull_back(map, src, target.coords(i));
    const Mat j = jacobian_checked(map, theta, steps);
    out.row(i) = (j.transpose() * interpolate_vector(v, theta)).transpose();
  }
  return VectorField(target, std::move(out), Variance::contravariant);
}

VectorField transform_vector_field(const std::function<Vec(const Vec&)>& v,
                                   const ParameterGrid& source, const Diffeomorphism& map,
                                   const ParameterGrid& target) {
  const auto steps = fd_steps(source);
  Mat out(target.size(), target.dim());
  for (Index i = 0; i < target.size(); ++i) {
    const Vec theta = pull_back(map, source, target.coords(i));
    const Mat j = jacobian_checked(map, theta, steps);
    out.row(i) = (j.transpose() * v(theta)).transpose();
  }
  return VectorField(target, std::move(out), Variance::contravariant);
}

InvarianceReport invariance_report(const StatisticalModel& model,
                                   const std::function<Vec(const Vec&)>& v,
                                   const Diffeomorphism& map, double n, bool transform_v,
                                   double tolerance) {
  InvarianceReport report;
  report.map_name = map.name;
  report.transformed_v = transform_v;
  report.tolerance = tolerance;

  const auto v_src = VectorField::from_function(model.grid(), v, Variance::contravariant);
  const BoundReport src = gill_levit_bound(model, v_src, n);

  const auto pushed = pushforward_model(model, map);
  const auto& tgt_grid = pushed.model.grid();
  VectorField v_tgt;
  if (transform_v) {
    v_tgt = transform_vector_field(v, model.grid(), map, tgt_grid);
  } else {
    const ParameterGrid& src_grid = model.grid();
    v_tgt = VectorField::from_function(
        tgt_grid, [&](const Vec& y) { return v(pull_back(map, src_grid, y)); },
        Variance::contravariant);
  }
  const BoundReport tgt = gill_levit_bound(pushed.model, v_tgt, n);

  report.bound_source = src.B;
  report.bound_target = tgt.B;
  report.a_source = src.A;
  report.f_source = src.F;
  report.p_source = src.P;
  report.a_target = tgt.A;
  report.f_target = tgt.F;
  report.p_target = tgt.P;
  const double scale = std::max(std::abs(src.B), 1e-300);
  report.relative_difference = std::abs(src.B - tgt.B) / scale;
  report.invariant = report.relative_difference <= tolerance;
  return report;
}

}  // namespace bcrb
