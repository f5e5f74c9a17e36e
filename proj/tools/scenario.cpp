#include "scenario.hpp"

#include "report.hpp"

#include "bcrb/field_io.hpp"
#include "bcrb/gl_bounds.hpp"
#include "bcrb/imaging.hpp"
#include "bcrb/model_geometry.hpp"
#include "bcrb/optimal_field.hpp"
#include "bcrb/quantum_info.hpp"
#include "bcrb/wave_minimax.hpp"
#include "bcrb/waveform_spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

namespace bcrb::cli {

namespace fs = std::filesystem;

namespace {

using ScalarFn = std::function<double(const Vec&)>;
using VectorFn = std::function<Vec(const Vec&)>;
using MatrixFn = std::function<Mat(const Vec&)>;

struct Context {
  fs::path base;
  RunOptions options;
  std::map<std::string, std::string>* inputs;

  /// Resolves a referenced file, records its hash and returns the full path.
  std::string file(const Node& n) const {
    const std::string rel = n.string();
    const fs::path p = fs::path(rel).is_absolute() ? fs::path(rel) : base / rel;
    std::ifstream in(p, std::ios::binary);
    if (!in) n.fail("cannot read '" + rel + "'");
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    (*inputs)[rel] = sha256_hex(bytes);
    return p.string();
  }
};

json to_json(const Vec& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json to_json(const Mat& m) {
  json a = json::array();
  for (Index r = 0; r < m.rows(); ++r) a.push_back(to_json(Vec(m.row(r).transpose())));
  return a;
}

json to_json(const BoundReport& r) {
  return {{"A", r.A},         {"F", r.F},
          {"P", r.P},         {"B", r.B},
          {"n", r.n},         {"v_choice", r.v_choice},
          {"boundary_residual", r.boundary_residual},
          {"contravariant", r.contravariant}};
}

template <class Field>
std::string field_csv(const Field& f) {
  std::ostringstream os;
  write_csv(os, f);
  return os.str();
}

std::vector<std::string> cells(std::initializer_list<double> xs) {
  std::vector<std::string> out;
  for (double x : xs) out.push_back(format_float(x));
  return out;
}

// ---------------------------------------------------------------------------
// Grids, fields and models
// ---------------------------------------------------------------------------

ParameterGrid parse_grid(const Node& n, const Context& ctx, int max_dim) {
  n.expect_keys({"lower", "upper", "nodes"});
  const auto lower = n.at("lower").numbers();
  const int p = static_cast<int>(lower.size());
  if (p > max_dim) n.at("lower").fail("at most " + std::to_string(max_dim) + " axes supported here");
  const auto upper = n.at("upper").numbers(p);
  const Node nodes = n.at("nodes");
  if (nodes.size() != static_cast<std::size_t>(p))
    nodes.fail("expected " + std::to_string(p) + " entries");
  std::vector<int> counts;
  double total = 1;
  for (int a = 0; a < p; ++a) {
    counts.push_back(static_cast<int>(nodes[a].integer(3, 1000001)));
    if (!(upper[a] > lower[a])) n.at("upper")[a].fail("must exceed lower");
    total *= double(counts[a] - 1) * ctx.options.grid_scale + 1;
  }
  if (total > 4e6) nodes.fail("grid has more than 4e6 nodes after scaling");
  return ParameterGrid(lower, upper, counts).refined(ctx.options.grid_scale);
}

void check_box(const Node& n, const ParameterGrid& file_grid, const ParameterGrid& grid) {
  if (file_grid.dim() != grid.dim()) n.fail("CSV field has the wrong number of coordinates");
  for (int a = 0; a < grid.dim(); ++a) {
    const double tol = 1e-9 * (grid.upper(a) - grid.lower(a));
    if (std::abs(file_grid.lower(a) - grid.lower(a)) > tol ||
        std::abs(file_grid.upper(a) - grid.upper(a)) > tol)
      n.fail("CSV field does not cover the scenario box");
  }
}

template <class Reader>
auto read_field(const Node& n, const Context& ctx, Reader reader) {
  const std::string path = ctx.file(n);
  try {
    return reader(path);
  } catch (const Error& e) {
    n.fail(e.what());
  }
}

ScalarFn parse_prior(const Node& n, const ParameterGrid& grid, const Context& ctx) {
  const int p = grid.dim();
  const std::string type = n.at("type").choice({"gaussian", "bump", "uniform", "csv"});
  if (type == "gaussian") {
    n.expect_keys({"type", "mean", "variance"});
    const Vec mean = n.at("mean").vector(p);
    Vec var = n.at("variance").vector(p);
    for (int a = 0; a < p; ++a)
      if (!(var[a] > 0)) n.at("variance")[a].fail("must be positive");
    return [=](const Vec& x) { return std::exp(-0.5 * ((x - mean).array().square() / var.array()).sum()); };
  }
  if (type == "bump") {
    n.expect_keys({"type", "power"});
    const double k = number_or(n, "power", 2.0, 1.0, 16.0);
    return [=](const Vec& x) {
      double v = 1;
      for (int a = 0; a < p; ++a)
        v *= std::pow(std::max(0.0, (x[a] - grid.lower(a)) * (grid.upper(a) - x[a])), k);
      return v;
    };
  }
  if (type == "uniform") {
    n.expect_keys({"type"});
    return [](const Vec&) { return 1.0; };
  }
  n.expect_keys({"type", "path"});
  const ScalarField f = read_field(n.at("path"), ctx, read_scalar_csv);
  check_box(n.at("path"), f.grid(), grid);
  for (Index i = 0; i < f.grid().size(); ++i)
    if (!(f[i] >= 0)) n.at("path").fail("prior values must be nonnegative");
  return [f](const Vec& x) { return std::max(0.0, interpolate_cubic(f.grid(), f.values(), x)); };
}

void require_psd(const Node& n, const Mat& m, bool strict) {
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff()))
    n.fail("matrix must be symmetric");
  const Vec ev = Eigen::SelfAdjointEigenSolver<Mat>(m).eigenvalues();
  const double floor = -1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  if (strict ? !(ev.minCoeff() > 0) : ev.minCoeff() < floor)
    n.fail(strict ? "matrix must be positive definite" : "matrix must be positive semidefinite");
}

MatrixFn parse_fisher(const Node& n, const ParameterGrid& grid, const Context& ctx) {
  const int p = grid.dim();
  const std::string type = n.at("type").choice({"constant", "poisson", "scale", "csv"});
  if (type == "constant") {
    n.expect_keys({"type", "matrix"});
    const Mat m = n.at("matrix").matrix(p);
    require_psd(n.at("matrix"), m, false);
    return [m](const Vec&) { return m; };
  }
  if (type == "poisson" || type == "scale") {
    n.expect_keys({"type"});
    for (int a = 0; a < p; ++a)
      if (!(grid.lower(a) > 0)) n.at("type").fail("requires positive coordinates on every axis");
    const double power = type == "poisson" ? 1.0 : 2.0;
    return [=](const Vec& x) { return Mat(x.array().pow(-power).matrix().asDiagonal()); };
  }
  n.expect_keys({"type", "path"});
  const MatrixField f = read_field(n.at("path"), ctx, read_matrix_csv);
  check_box(n.at("path"), f.grid(), grid);
  if (f.rows() != p) n.at("path").fail("Fisher CSV must hold " + std::to_string(p) + "x" + std::to_string(p) + " matrices");
  std::vector<Vec> entries(p * p, Vec(f.grid().size()));
  for (Index i = 0; i < f.grid().size(); ++i)
    for (int k = 0; k < p * p; ++k) entries[k][i] = f[i](k / p, k % p);
  const ParameterGrid g = f.grid();
  return [=](const Vec& x) {
    Mat m(p, p);
    for (int k = 0; k < p * p; ++k) m(k / p, k % p) = interpolate_cubic(g, entries[k], x);
    return Mat(0.5 * (m + m.transpose()));
  };
}

VectorFn parse_weight(const Node& n, const ParameterGrid& grid, const Context& ctx) {
  const int p = grid.dim();
  const std::string type = n.at("type").choice({"constant", "csv"});
  if (type == "constant") {
    n.expect_keys({"type", "vector"});
    const Vec u = n.at("vector").vector(p);
    return [u](const Vec&) { return u; };
  }
  n.expect_keys({"type", "path"});
  const VectorField f = read_field(n.at("path"), ctx, read_vector_csv);
  check_box(n.at("path"), f.grid(), grid);
  if (f.variance() != Variance::covariant) n.at("path").fail("weight CSV must use u<k> columns");
  if (f.components() != p) n.at("path").fail("weight CSV must have " + std::to_string(p) + " components");
  std::vector<Vec> cols;
  for (int a = 0; a < p; ++a) cols.push_back(f.values().col(a));
  const ParameterGrid g = f.grid();
  return [=](const Vec& x) {
    Vec u(p);
    for (int a = 0; a < p; ++a) u[a] = interpolate_cubic(g, cols[a], x);
    return u;
  };
}

StatisticalModel parse_model(const Node& n, const Context& ctx, int max_dim) {
  n.expect_keys({"grid", "fisher", "weight", "prior", "metric"});
  const ParameterGrid grid = parse_grid(n.at("grid"), ctx, max_dim);
  ModelFunctions fn;
  fn.fisher = parse_fisher(n.at("fisher"), grid, ctx);
  fn.weight = parse_weight(n.at("weight"), grid, ctx);
  fn.prior = parse_prior(n.at("prior"), grid, ctx);
  if (auto m = n.get("metric")) {
    m->expect_keys({"type", "matrix"});
    m->at("type").choice({"constant"});
    const Mat g = m->at("matrix").matrix(grid.dim());
    require_psd(m->at("matrix"), g, true);
    fn.metric = [g](const Vec&) { return g; };
  }
  return StatisticalModel::from_functions(grid, fn);
}

std::vector<double> parse_n_list(const Node& root) {
  const bool one = root.has("n"), many = root.has("n_list");
  if (one && many) root.fail("give either n or n_list, not both");
  if (one) return {root.at("n").positive()};
  if (!many) throw ConfigError(root.path() + ".n", "missing required field");
  const Node list = root.at("n_list");
  std::vector<double> out;
  for (std::size_t i = 0; i < list.size(); ++i) out.push_back(list[i].positive());
  if (out.empty()) list.fail("must not be empty");
  return out;
}

PointSpreadFunction parse_psf(const Node& n, const Context& ctx) {
  n.expect_keys({"catalog", "csv", "sigma"});
  const double sigma = n.has("sigma") ? n.at("sigma").positive() : 1.0;
  if (n.has("catalog") == n.has("csv")) n.fail("give exactly one of catalog or csv");
  if (n.has("catalog"))
    return PointSpreadFunction::from_catalog(
        n.at("catalog").choice({"gaussian", "first-order-hermite", "sinc"}), sigma);
  return read_field(n.at("csv"), ctx,
                    [sigma](const std::string& p) { return PointSpreadFunction::from_csv(p, sigma); });
}

ImagingOptions parse_imaging_options(const std::optional<Node>& n, const Context& ctx) {
  ImagingOptions o;
  if (!n) {
    o.nodes = (o.nodes - 1) * ctx.options.grid_scale + 1;
    return o;
  }
  n->expect_keys({"span_sigmas", "nodes", "basis_size"});
  o.span_sigmas = number_or(*n, "span_sigmas", o.span_sigmas, 1.0, 1e4);
  o.nodes = static_cast<int>(integer_or(*n, "nodes", o.nodes, 64, 1000000));
  o.nodes = (o.nodes - 1) * ctx.options.grid_scale + 1;
  o.basis_size = static_cast<int>(integer_or(*n, "basis_size", o.basis_size, 0, 200));
  return o;
}

// ---------------------------------------------------------------------------
// bound
// ---------------------------------------------------------------------------

VectorFn random_field(const ParameterGrid& grid, std::mt19937_64& rng, int degree) {
  std::normal_distribution<double> normal;
  const int p = grid.dim();
  Mat coeff(p, (degree + 1) * p);
  for (Index i = 0; i < coeff.size(); ++i) coeff.data()[i] = normal(rng);
  return [=](const Vec& x) {
    double taper = 1.0;
    Vec basis((degree + 1) * p);
    for (int a = 0; a < p; ++a) {
      const double lo = grid.lower(a), hi = grid.upper(a);
      const double t = (2 * x[a] - lo - hi) / (hi - lo);
      taper *= std::max(0.0, (x[a] - lo) * (hi - x[a])) / ((hi - lo) * (hi - lo));
      double power = 1.0;
      for (int k = 0; k <= degree; ++k) {
        basis[a * (degree + 1) + k] = power;
        power *= t;
      }
    }
    return Vec(taper * (coeff * basis));
  };
}

ScenarioResult run_bound(const Node& root, const Context& ctx) {
  root.expect_keys({"kind", "description", "output", "model", "n", "n_list", "v", "random_fields"});
  const StatisticalModel model = parse_model(root.at("model"), ctx, 3);
  const auto ns = parse_n_list(root);
  std::vector<std::string> choices{"natural", "van-trees", "optimal"};
  if (auto v = root.get("v")) {
    choices.clear();
    for (std::size_t i = 0; i < v->size(); ++i) choices.push_back((*v)[i].choice({"natural", "van-trees", "optimal"}));
    if (choices.empty()) v->fail("must not be empty");
  }
  int random_count = 0, degree = 3;
  if (auto r = root.get("random_fields")) {
    r->expect_keys({"count", "degree"});
    random_count = static_cast<int>(r->at("count").integer(0, 10000));
    degree = static_cast<int>(integer_or(*r, "degree", 3, 0, 8));
  }

  ScenarioResult out;
  std::vector<std::string> csv{BoundReport::csv_header()};
  json rows = json::array();
  std::mt19937_64 rng(ctx.options.seed);
  for (double n : ns) {
    const OptimalResult best = bmax(model, n);
    json row{{"n", n}, {"bmax", best.report.B}, {"solver_residual", best.residual}};
    json bounds = json::object();
    for (const auto& c : choices) {
      BoundReport r;
      if (c == "natural") r = natural_bound(model, n);
      if (c == "van-trees") r = van_trees_v(model, n).report;
      if (c == "optimal") {
        r = best.report;
        r.v_choice = "optimal";
      }
      bounds[c] = to_json(r);
      csv.push_back(r.csv_row());
    }
    row["bounds"] = bounds;
    if (random_count > 0) {
      double largest = -1, ratio = 0;
      int above = 0;
      for (int k = 0; k < random_count; ++k) {
        const auto v = VectorField::from_function(model.grid(), random_field(model.grid(), rng, degree),
                                                  Variance::contravariant);
        const double b = gill_levit_bound(model, v, n).B;
        largest = std::max(largest, b);
        ratio = std::max(ratio, b / best.report.B);
        above += b > best.report.B + 1e-8;
      }
      row["random_fields"] = {{"count", random_count}, {"largest_bound", largest},
                              {"largest_ratio", ratio}, {"above_bmax", above}};
    }
    rows.push_back(row);
  }
  std::string text;
  for (const auto& line : csv) text += line + "\n";
  out.files.push_back({"bounds.csv", text});
  out.results = {{"grid", model.grid().describe()}, {"rows", rows}};
  return out;
}

// ---------------------------------------------------------------------------
// optimal
// ---------------------------------------------------------------------------

/// <u F^{-1} u>, or NaN when F is singular somewhere.
double mean_local_bound(const StatisticalModel& model) {
  const ParameterGrid& g = model.grid();
  Vec c(g.size());
  for (Index i = 0; i < g.size(); ++i) {
    Eigen::LDLT<Mat> ldlt(model.fisher()[i]);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0)) return std::nan("");
    const Vec u = model.weight().at(i);
    c[i] = model.prior()[i] * u.dot(ldlt.solve(u));
  }
  return integrate(ScalarField(g, c), model.metric());
}

ScenarioResult run_optimal(const Node& root, const Context& ctx) {
  root.expect_keys({"kind", "description", "output", "model", "n", "n_list", "export_field"});
  const StatisticalModel model = parse_model(root.at("model"), ctx, 3);
  const auto ns = parse_n_list(root);
  const bool export_field = boolean_or(root, "export_field", true);
  const double local = mean_local_bound(model);

  ScenarioResult out;
  json rows = json::array();
  std::vector<std::vector<std::string>> csv;
  for (std::size_t k = 0; k < ns.size(); ++k) {
    const double n = ns[k];
    const OptimalResult r = bmax(model, n);
    json row{{"n", n},
             {"bmax", r.report.B},
             {"n_times_bmax", n * r.report.B},
             {"A", r.report.A},
             {"F", r.report.F},
             {"P", r.report.P},
             {"solver", r.solver},
             {"solver_residual", r.residual}};
    if (std::isfinite(local)) row["n_times_bmax_over_mean_local_bound"] = n * r.report.B / local;
    rows.push_back(row);
    csv.push_back(cells({n, r.report.B, n * r.report.B}));
    if (export_field) {
      const std::string name =
          ns.size() == 1 ? "least_favorable.csv" : "least_favorable_" + std::to_string(k) + ".csv";
      out.files.push_back({name, field_csv(r.v.front())});
    }
  }
  out.files.push_back({"bmax.csv", csv_text({"n", "bmax", "n_times_bmax"}, csv)});
  out.results = {{"grid", model.grid().describe()}, {"rows", rows}};
  out.results["mean_local_bound"] = local;
  return out;
}

// ---------------------------------------------------------------------------
// minimax
// ---------------------------------------------------------------------------

json rate_json(const RateFit& fit, ScenarioResult& out) {
  json rows = json::array();
  std::vector<std::vector<std::string>> csv;
  for (const auto& r : fit.rows) {
    rows.push_back({{"n", r.n},
                    {"e_min", r.e_min},
                    {"b_worst", r.b_worst},
                    {"e_trial", r.e_trial},
                    {"w_opt", r.w_opt},
                    {"half_width", r.half_width},
                    {"nodes", r.nodes}});
    csv.push_back(cells({r.n, r.e_min, r.b_worst}));
  }
  out.files.push_back({"rate.csv", csv_text({"n", "E_min", "B_worst"}, csv)});
  return {{"slope", fit.slope},
          {"intercept", fit.intercept},
          {"trial_slope", fit.trial_slope},
          {"width_exponent", fit.width_exponent},
          {"rows", rows}};
}

ScenarioResult run_minimax(const Node& root, const Context& ctx) {
  root.expect_keys({"kind", "description", "output", "potential", "n_list", "rate", "a"});
  const Node pot = root.at("potential");
  const std::string type = pot.at("type").choice({"power", "imaging"});
  const Node list = root.at("n_list");
  std::vector<double> ns;
  for (std::size_t i = 0; i < list.size(); ++i) ns.push_back(list[i].positive());
  if (ns.size() < 3) list.fail("need at least 3 values");
  if (*std::max_element(ns.begin(), ns.end()) < 1e3 * *std::min_element(ns.begin(), ns.end()))
    list.fail("must span at least 3 decades");

  ScenarioResult out;
  if (type == "power") {
    pot.expect_keys({"type", "exponent", "amplitude"});
    RateOptions o;
    o.exponent = pot.at("exponent").number(0, 8);
    o.amplitude = pot.has("amplitude") ? pot.at("amplitude").positive() : 1.0;
    o.a = root.has("a") ? root.at("a").positive() : 1.0;
    if (auto r = root.get("rate")) {
      r->expect_keys({"nodes_per_width", "initial_half_width", "doubling_tolerance", "max_doublings"});
      o.nodes_per_width = static_cast<int>(integer_or(*r, "nodes_per_width", o.nodes_per_width, 10, 10000));
      o.initial_half_width = number_or(*r, "initial_half_width", o.initial_half_width, 1.0, 1e3);
      o.doubling_tolerance = number_or(*r, "doubling_tolerance", o.doubling_tolerance, 1e-8, 0.5);
      o.max_doublings = static_cast<int>(integer_or(*r, "max_doublings", o.max_doublings, 0, 20));
    }
    o.nodes_per_width *= ctx.options.grid_scale;
    const double m = o.exponent, amp = o.amplitude;
    const auto fit = rate_fit([=](double t) { return m == 0 ? amp : amp * std::pow(std::abs(t), m); }, ns, o);
    out.results = rate_json(fit, out);
    out.results["expected_slope"] = -2.0 / (m + 2.0);
    return out;
  }
  pot.expect_keys({"type", "psf", "theta0", "direction", "options"});
  for (const char* k : {"rate", "a"})
    if (root.has(k)) root.at(k).fail("only supported for power potentials");
  const auto psf = parse_psf(pot.at("psf"), ctx);
  const Vec theta0 = pot.at("theta0").vector();
  const Vec v = pot.at("direction").vector(static_cast<int>(theta0.size()));
  if (v.norm() == 0) pot.at("direction").fail("must be nonzero");
  const auto fit = minimax_rate(psf, theta0, v, ns, parse_imaging_options(pot.get("options"), ctx));
  out.results = rate_json(fit, out);
  return out;
}

// ---------------------------------------------------------------------------
// quantum
// ---------------------------------------------------------------------------

DensityFamily qubit_rotation(double r) {
  auto rho = [r](const Vec& t) {
    CMat m(2, 2);
    const Complex e = std::polar(1.0, t[0]);
    m << 0.5, 0.5 * r * std::conj(e), 0.5 * r * e, 0.5;
    return m;
  };
  auto derivative = [r](const Vec& t) {
    CMat m(2, 2);
    const Complex e = std::polar(1.0, t[0]);
    const Complex i(0, 1);
    m << 0.0, -0.5 * i * r * std::conj(e), 0.5 * i * r * e, 0.0;
    return std::vector<CMat>{m};
  };
  return DensityFamily(2, 1, rho, derivative);
}

ScenarioResult run_quantum(const Node& root, const Context& ctx) {
  root.expect_keys({"kind", "description", "output", "family", "grid", "prior", "weight", "n",
                    "measurement", "export_helstrom", "gaussian_shift"});
  if (!root.has("family") && !root.has("gaussian_shift"))
    root.fail("needs a family or a gaussian_shift section");
  ScenarioResult out;
  out.results = json::object();
  if (auto fam = root.get("family")) {
    fam->expect_keys({"type", "purity"});
    fam->at("type").choice({"qubit-rotation"});
    const double r = fam->at("purity").number(1e-6, 1.0);
    const ParameterGrid grid = parse_grid(root.at("grid"), ctx, 1);
    const double n = root.at("n").positive();
    const std::string measurement =
        root.has("measurement") ? root.at("measurement").choice({"sigma-x", "none"}) : "sigma-x";
    const DensityFamily family = qubit_rotation(r);
    const MatrixField k = helstrom_field(family, grid);
    ModelFunctions fn;
    fn.fisher = [r](const Vec& t) {
      const double c = std::cos(t[0]), s = std::sin(t[0]);
      const double den = 1 - r * r * c * c;
      return Mat(Mat::Constant(1, 1, den < 1e-14 ? r * r : r * r * s * s / den));
    };
    if (measurement == "none") fn.fisher = [r](const Vec&) { return Mat(Mat::Constant(1, 1, r * r)); };
    fn.weight = parse_weight(root.at("weight"), grid, ctx);
    fn.prior = parse_prior(root.at("prior"), grid, ctx);
    const StatisticalModel model = StatisticalModel::from_functions(grid, fn);
    std::optional<MatrixField> classical;
    if (measurement != "none") classical = model.fisher();
    const QmaxResult q = qmax(model, k, n, classical);
    double kmin = 1e300, kmax = -1e300;
    for (Index i = 0; i < grid.size(); ++i) {
      kmin = std::min(kmin, k[i](0, 0));
      kmax = std::max(kmax, k[i](0, 0));
    }
    json res{{"qmax", q.quantum.report.B},
             {"qmax_solver_residual", q.quantum.residual},
             {"helstrom_min", kmin},
             {"helstrom_max", kmax},
             {"measurement", measurement}};
    if (q.classical) {
      res["bmax"] = q.classical->report.B;
      res["qmax_le_bmax"] = q.quantum.report.B <= q.classical->report.B + 1e-10;
    }
    out.results["family"] = res;
    if (boolean_or(root, "export_helstrom", false)) out.files.push_back({"helstrom.csv", field_csv(k)});
  }
  if (auto gs = root.get("gaussian_shift")) {
    gs->expect_keys({"K", "G", "u"});
    const Mat k = gs->at("K").matrix();
    const int d = static_cast<int>(k.rows());
    const Mat g = gs->at("G").matrix(d);
    const Vec u = gs->at("u").vector(d);
    require_psd(gs->at("K"), k, false);
    require_psd(gs->at("G"), g, false);
    const auto b = gaussian_shift_bounds(k, g, u);
    out.results["gaussian_shift"] = {{"q_max", b.q_max},
                                     {"achieved_risk", b.achieved_risk},
                                     {"ratio", b.achieved_risk / b.q_max}};
  }
  return out;
}

// ---------------------------------------------------------------------------
// waveform
// ---------------------------------------------------------------------------

Spectrum parse_spectrum(const Node& n, const Context& ctx) {
  const std::string type =
      n.at("type").choice({"constant", "rectangle", "lorentzian", "gaussian", "infinite", "csv"});
  if (type == "constant") {
    n.expect_keys({"type", "value"});
    const double v = n.at("value").number(0);
    return [v](double) { return v; };
  }
  if (type == "infinite") {
    n.expect_keys({"type"});
    return [](double) { return std::numeric_limits<double>::infinity(); };
  }
  if (type == "csv") {
    n.expect_keys({"type", "path"});
    return read_field(n.at("path"), ctx, read_spectrum_csv);
  }
  n.expect_keys({"type", "height", "width"});
  const double h = n.at("height").number(0);
  const double w = n.at("width").positive();
  if (type == "rectangle") return [=](double x) { return std::abs(x) <= w ? h : 0.0; };
  if (type == "lorentzian") return [=](double x) { return h / (1 + (x / w) * (x / w)); };
  return [=](double x) { return h * std::exp(-0.5 * (x / w) * (x / w)); };
}

ScenarioResult run_waveform(const Node& root, const Context& ctx) {
  root.expect_keys({"kind", "description", "output", "omega_max", "nodes", "hbar", "spectra", "circulant"});
  SpectralModel s;
  const double omega_max = root.at("omega_max").positive();
  const long long nodes = root.at("nodes").integer(3, 2000001);
  if (nodes % 2 == 0) root.at("nodes").fail("must be odd");
  s.omega = SpectralModel::symmetric_grid(omega_max, static_cast<int>((nodes - 1) * ctx.options.grid_scale + 1));
  s.hbar = root.has("hbar") ? root.at("hbar").positive() : 1.0;
  const Node spectra = root.at("spectra");
  spectra.expect_keys({"s_q", "s_theta", "h2", "s_z", "hx2"});
  s.s_q = parse_spectrum(spectra.at("s_q"), ctx);
  s.s_theta = parse_spectrum(spectra.at("s_theta"), ctx);
  if (spectra.has("h2")) s.h2 = parse_spectrum(spectra.at("h2"), ctx);
  if (spectra.has("s_z") != spectra.has("hx2")) spectra.fail("s_z and hx2 must be given together");
  if (spectra.has("s_z")) {
    s.s_z = parse_spectrum(spectra.at("s_z"), ctx);
    s.hx2 = parse_spectrum(spectra.at("hx2"), ctx);
  }
  s.validate();

  ScenarioResult out;
  const double q = continuum_qmax(s);
  out.results = {{"continuum_qmax", q}};
  if (auto c = root.get("circulant")) {
    c->expect_keys({"T", "p_list"});
    if (spectra.has("h2")) c->fail("the circulant bound uses instant estimation; remove spectra.h2");
    const double T = c->at("T").positive();
    const Node list = c->at("p_list");
    json rows = json::array();
    std::vector<std::vector<std::string>> csv;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const int p = static_cast<int>(list[i].integer(1, 1 << 22));
      const double b = build_circulant_bound(TimeDiscretization::instant(T, p), s);
      const double rel = std::abs(b - q) / q;
      rows.push_back({{"p", p}, {"qmax", b}, {"relative_difference", rel}});
      csv.push_back({std::to_string(p), format_float(b), format_float(rel)});
    }
    out.results["circulant"] = {{"T", T}, {"rows", rows}};
    out.files.push_back({"circulant.csv", csv_text({"p", "qmax", "relative_difference"}, csv)});
  }
  if (s.s_z) {
    out.results["wiener_risk"] = wiener_risk(s);
    auto violations = noise_floor_check(s);
    std::sort(violations.begin(), violations.end(),
              [](const auto& a, const auto& b) { return a.omega < b.omega; });
    json list = json::array();
    std::vector<std::vector<std::string>> csv;
    for (const auto& v : violations) {
      list.push_back({{"omega", v.omega},
                      {"noise_floor", v.noise_floor},
                      {"quantum_limit", v.quantum_limit},
                      {"margin", v.margin}});
      csv.push_back(cells({v.omega, v.noise_floor, v.quantum_limit, v.margin}));
    }
    out.results["violations"] = list;
    out.files.push_back({"violations.csv", csv_text({"omega", "noise_floor", "quantum_limit", "margin"}, csv)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// imaging
// ---------------------------------------------------------------------------

ScenarioResult run_imaging(const Node& root, const Context& ctx) {
  root.expect_keys({"kind", "description", "output", "psf", "options", "sources", "rank_scan",
                    "exponent", "bounds"});
  const auto psf = parse_psf(root.at("psf"), ctx);
  const ImagingOptions opts = parse_imaging_options(root.get("options"), ctx);
  if (!root.has("sources") && !root.has("rank_scan") && !root.has("exponent") && !root.has("bounds"))
    root.fail("needs at least one of sources, rank_scan, exponent, bounds");

  ScenarioResult out;
  out.results = {{"psf", psf.name}, {"sigma", psf.sigma}};
  if (auto s = root.get("sources")) {
    const Vec theta = s->vector();
    const Mat f = direct_imaging_fisher(psf, theta, opts);
    const HelstromReport h = imaging_helstrom(psf, theta, opts);
    out.results["sources"] = {{"theta", to_json(theta)},
                              {"fisher", to_json(f)},
                              {"fisher_eigenvalues", to_json(Vec(Eigen::SelfAdjointEigenSolver<Mat>(f).eigenvalues()))},
                              {"helstrom", to_json(h.k)},
                              {"helstrom_eigenvalues", to_json(h.eigenvalues)},
                              {"helstrom_rank", h.rank},
                              {"projection_error", h.projection_error},
                              {"basis_dim", h.basis_dim}};
  }
  if (auto r = root.get("rank_scan")) {
    r->expect_keys({"positions", "scales"});
    const Vec positions = r->at("positions").vector();
    if (positions.size() < 2) r->at("positions").fail("need at least 2 sources");
    const Node scales = r->at("scales");
    const int p = static_cast<int>(positions.size());
    std::vector<std::string> header{"scale"};
    for (int a = 0; a < p; ++a) header.push_back("lambda" + std::to_string(a + 1));
    json rows = json::array();
    std::vector<std::vector<std::string>> csv;
    for (std::size_t i = 0; i < scales.size(); ++i) {
      const double eps = scales[i].positive();
      const HelstromReport h = imaging_helstrom(psf, positions * eps, opts);
      std::vector<std::string> line{format_float(eps)};
      for (int a = 0; a < p; ++a) line.push_back(format_float(h.eigenvalues[a]));
      csv.push_back(line);
      rows.push_back({{"scale", eps},
                      {"eigenvalues", to_json(h.eigenvalues)},
                      {"rank", h.rank},
                      {"last_ratio", h.eigenvalues[p - 1] / h.eigenvalues[p - 2]}});
    }
    out.results["rank_scan"] = rows;
    out.files.push_back({"rank.csv", csv_text(header, csv)});
  }
  if (auto e = root.get("exponent")) {
    e->expect_keys({"theta0", "direction", "tau"});
    const Vec theta0 = e->at("theta0").vector();
    const Vec v = e->at("direction").vector(static_cast<int>(theta0.size()));
    std::vector<double> taus;
    const Node tl = e->at("tau");
    for (std::size_t i = 0; i < tl.size(); ++i) taus.push_back(tl[i].positive());
    const ExponentFit fit = exponent_fit(psf, theta0, v, taus, opts);
    json samples = json::array();
    for (const auto& [t, f] : fit.samples) samples.push_back({{"tau", t}, {"information", f}});
    out.results["exponent"] = {{"m", fit.m},
                               {"amplitude", fit.amplitude},
                               {"r_squared", fit.r_squared},
                               {"warning", fit.warning},
                               {"samples", samples}};
  }
  if (auto b = root.get("bounds")) {
    b->expect_keys({"grid", "prior", "u", "n", "export_fields"});
    const ParameterGrid grid = parse_grid(b->at("grid"), ctx, 3);
    const auto prior = parse_prior(b->at("prior"), grid, ctx);
    const Vec u = b->at("u").vector(grid.dim());
    const double n = b->at("n").positive();
    const ImagingBounds r = quantum_vs_classical(psf, grid, prior, u, n, opts);
    out.results["bounds"] = {{"b_max", r.b_max}, {"q_max", r.q_max}, {"qmax_le_bmax", r.q_max <= r.b_max + 1e-10}};
    if (boolean_or(*b, "export_fields", false) && r.fisher.grid().size() > 0) {
      out.files.push_back({"fisher.csv", field_csv(r.fisher)});
      out.files.push_back({"helstrom.csv", field_csv(r.helstrom)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// invariance
// ---------------------------------------------------------------------------

Diffeomorphism parse_map(const Node& n, int p) {
  const std::string type = n.at("type").choice({"identity", "affine", "odd-power", "logistic", "linear"});
  if (type == "identity") {
    n.expect_keys({"type"});
    return maps::identity();
  }
  if (type == "affine") {
    n.expect_keys({"type", "scale", "shift"});
    const Vec scale = n.at("scale").vector(p);
    for (int a = 0; a < p; ++a)
      if (scale[a] == 0) n.at("scale")[a].fail("must be nonzero");
    return maps::affine(scale, n.has("shift") ? n.at("shift").vector(p) : Vec(Vec::Zero(p)));
  }
  if (type == "odd-power") {
    n.expect_keys({"type", "power"});
    const long long k = n.at("power").integer(1, 15);
    if (k % 2 == 0) n.at("power").fail("must be odd");
    return maps::odd_power(static_cast<int>(k));
  }
  if (type == "logistic") {
    n.expect_keys({"type", "center", "width"});
    return maps::logistic(number_or(n, "center", 0.0), n.at("width").positive());
  }
  n.expect_keys({"type", "matrix"});
  const Mat a = n.at("matrix").matrix(p);
  if (std::abs(a.determinant()) < 1e-12) n.at("matrix").fail("must be invertible");
  return maps::linear(a);
}

VectorFn parse_v(const Node& n, const ParameterGrid& grid) {
  const int p = grid.dim();
  const std::string type = n.at("type").choice({"constant", "taper"});
  n.expect_keys({"type", "vector"});
  const Vec c = n.at("vector").vector(p);
  if (type == "constant") return [c](const Vec&) { return c; };
  return [c, grid, p](const Vec& x) {
    double t = 1;
    for (int a = 0; a < p; ++a) {
      const double lo = grid.lower(a), hi = grid.upper(a);
      t *= 4 * (x[a] - lo) * (hi - x[a]) / ((hi - lo) * (hi - lo));
    }
    return Vec(t * c);
  };
}

json invariance_json(const InvarianceReport& r) {
  return {{"map", r.map_name},
          {"bound_source", r.bound_source},
          {"bound_target", r.bound_target},
          {"relative_difference", r.relative_difference},
          {"tolerance", r.tolerance},
          {"transformed_v", r.transformed_v},
          {"invariant", r.invariant},
          {"source", {{"A", r.a_source}, {"F", r.f_source}, {"P", r.p_source}}},
          {"target", {{"A", r.a_target}, {"F", r.f_target}, {"P", r.p_target}}}};
}

ScenarioResult run_invariance(const Node& root, const Context& ctx) {
  root.expect_keys({"kind", "description", "output", "model", "map", "v", "n", "tolerance", "control", "bmax"});
  const StatisticalModel model = parse_model(root.at("model"), ctx, 3);
  const Diffeomorphism map = parse_map(root.at("map"), model.dim());
  const VectorFn v = parse_v(root.at("v"), model.grid());
  const double n = root.at("n").positive();
  const double tol = number_or(root, "tolerance", 1e-6, 1e-15, 1.0);

  ScenarioResult out;
  out.results = {{"transformed", invariance_json(invariance_report(model, v, map, n, true, tol))}};
  if (boolean_or(root, "control", true))
    out.results["control"] = invariance_json(invariance_report(model, v, map, n, false, tol));
  if (boolean_or(root, "bmax", true)) {
    const PushforwardResult pushed = pushforward_model(model, map);
    const double source = bmax(model, n).report.B;
    const double target = bmax(pushed.model, n).report.B;
    out.results["bmax"] = {{"source", source},
                           {"target", target},
                           {"relative_difference", std::abs(target - source) / std::abs(source)},
                           {"prior_renormalization", pushed.prior_renormalization},
                           {"interpolated", pushed.interpolated}};
  }
  return out;
}

}  // namespace

ScenarioResult run_scenario(const std::string& kind, const json& config, const fs::path& base_dir,
                            const RunOptions& options) {
  const Node root(config, "$");
  if (!config.is_object()) root.fail("scenario must be a JSON object");
  if (auto k = root.get("kind")) {
    if (k->string() != kind) k->fail("scenario is '" + k->string() + "' but the subcommand is '" + kind + "'");
  }
  if (auto d = root.get("description")) d->string();
  if (auto o = root.get("output")) o->string();
  ScenarioResult result;
  Context ctx{base_dir, options, &result.inputs};
  ScenarioResult r;
  if (kind == "bound") r = run_bound(root, ctx);
  else if (kind == "optimal") r = run_optimal(root, ctx);
  else if (kind == "minimax") r = run_minimax(root, ctx);
  else if (kind == "quantum") r = run_quantum(root, ctx);
  else if (kind == "waveform") r = run_waveform(root, ctx);
  else if (kind == "imaging") r = run_imaging(root, ctx);
  else if (kind == "invariance") r = run_invariance(root, ctx);
  else throw ConfigError("$.kind", "unknown scenario kind '" + kind + "'");
  r.inputs = std::move(result.inputs);
  return r;
}

std::string build_report(const std::string& kind, const json& config, const RunOptions& options,
                         const ScenarioResult& result) {
  json files = json::array();
  std::vector<std::string> names;
  for (const auto& f : result.files) names.push_back(f.name);
  std::sort(names.begin(), names.end());
  for (const auto& n : names) files.push_back(n);
  json report{{"kind", kind},
              {"config", config},
              {"config_sha256", sha256_hex(config.dump())},
              {"inputs", result.inputs},
              {"options", {{"grid_scale", options.grid_scale}, {"seed", options.seed}}},
              {"files", files},
              {"results", result.results}};
  return canonical_json(report, {"config"});
}

}  // namespace bcrb::cli
