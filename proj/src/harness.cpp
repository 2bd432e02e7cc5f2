#include "sflab/harness.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <mutex>
#include <numeric>
#include <sstream>

#include "sflab/error.hpp"
#include "sflab/specialfn.hpp"

namespace sflab::harness {

using geometry::ModelManifold;

namespace {

std::string format_number(double x) {
  std::ostringstream out;
  out.precision(6);
  out << x;
  return out.str();
}

void finalize_distances(QuadratureRule& rule) {
  const std::size_t count = rule.distance.size();
  std::vector<std::uint32_t> order(count);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return rule.distance[a] < rule.distance[b]; });
  rule.unique_distance.clear();
  rule.slot.assign(count, 0);
  for (std::uint32_t idx : order) {
    const double d = rule.distance[idx];
    if (rule.unique_distance.empty() || rule.unique_distance.back() != d) rule.unique_distance.push_back(d);
    rule.slot[idx] = static_cast<std::uint32_t>(rule.unique_distance.size() - 1);
  }
}

double weighted_sum(const QuadratureRule& rule, const std::vector<double>& integrand) {
  std::vector<double> terms(integrand.size());
  for (std::size_t i = 0; i < integrand.size(); ++i) terms[i] = rule.weights[i] * integrand[i];
  return pairwise_sum(terms);
}

double rescale(int n, double lambda) { return n == 1 ? 1.0 : std::pow(lambda, 0.5 * (1 - n)); }

double max_column_norm(const geometry::Lattice& lat) {
  double m = 0.0;
  for (int i = 0; i < lat.dimension(); ++i) m = std::max(m, lat.basis().col(i).norm());
  return m;
}

std::mutex fftw_mutex;

}  // namespace

double QuadratureRule::total_weight() const { return pairwise_sum(weights); }

int required_torus_points(const ModelManifold& torus, double lambda) {
  const auto lat = geometry::torus_lattice(torus);
  const int needed = static_cast<int>(std::ceil(4.0 * lambda * max_column_norm(lat) / two_pi));
  return std::max(needed, 4);
}

QuadratureRule torus_grid_rule(const ModelManifold& torus, int points_per_axis) {
  geometry::validate(torus);
  if (!geometry::is_torus(torus)) fail(ErrorKind::domain, "torus_grid_rule needs a torus");
  const auto lat = geometry::torus_lattice(torus);
  const int n = lat.dimension();
  if (n > 3) fail(ErrorKind::capacity, "torus grids are limited to dimension 3");
  if (points_per_axis < 2) fail(ErrorKind::domain, "torus grid needs at least 2 points per axis");
  const std::size_t N = static_cast<std::size_t>(points_per_axis);
  std::size_t total = 1;
  for (int i = 0; i < n; ++i) total *= N;
  if (total > (std::size_t{1} << 27)) fail(ErrorKind::capacity, "torus grid exceeds 2^27 nodes");

  QuadratureRule rule;
  rule.kind = QuadratureRule::Kind::torus_grid;
  rule.manifold = torus;
  rule.grid.assign(n, points_per_axis);
  rule.weights.assign(total, lat.volume() / static_cast<double>(total));
  rule.distance.resize(total);
  const geometry::Matrix& B = lat.basis();
  const bool orth = lat.orthogonal();
  parallel_for(total, [&](std::size_t idx) {
    geometry::Vector u(n);
    std::size_t rest = idx;
    for (int axis = n - 1; axis >= 0; --axis) {
      const std::size_t j = rest % N;
      rest /= N;
      // Reduce j / N to (-1/2, 1/2] with integers so symmetric nodes agree exactly.
      const long signed_j = (2 * j > N) ? static_cast<long>(j) - static_cast<long>(N) : static_cast<long>(j);
      u[axis] = static_cast<double>(signed_j) / static_cast<double>(N);
    }
    if (orth) {
      double s = 0.0;
      for (int axis = 0; axis < n; ++axis) {
        const double c = std::fabs(u[axis]) * B.col(axis).norm();
        s += c * c;
      }
      rule.distance[idx] = std::sqrt(s);
    } else {
      rule.distance[idx] = geometry::torus_distance(lat, B * u);
    }
  });
  finalize_distances(rule);
  return rule;
}

QuadratureRule sphere_gauss_rule(int n, int nodes) {
  if (n < 2) fail(ErrorKind::domain, "sphere dimension must be >= 2");
  if (nodes < 2) fail(ErrorKind::domain, "sphere rule needs at least 2 nodes");
  const auto& gl = gauss_legendre(static_cast<std::size_t>(nodes));
  QuadratureRule rule;
  rule.kind = QuadratureRule::Kind::sphere_gauss;
  rule.manifold = geometry::Sphere{n};
  const double area = specialfn::sphere_area_constant(n - 1);
  for (int i = 0; i < nodes; ++i) {
    const double s = 0.5 * pi * (gl.nodes[i] + 1.0);
    rule.angle.push_back(s);
    rule.distance.push_back(s);
    rule.weights.push_back(0.5 * pi * gl.weights[i] * area * std::pow(std::sin(s), n - 1));
  }
  finalize_distances(rule);
  return rule;
}

QuadratureRule disc_polar_rule(double radius, int radial_nodes, int angular_nodes) {
  if (!(radius > 0.0)) fail(ErrorKind::domain, "disc radius must be positive");
  if (radial_nodes < 1 || angular_nodes < 1) fail(ErrorKind::domain, "disc rule needs nodes");
  const auto& gl = gauss_legendre(static_cast<std::size_t>(radial_nodes));
  QuadratureRule rule;
  rule.kind = QuadratureRule::Kind::disc_polar;
  rule.manifold = geometry::Euclidean{2};
  rule.grid = {radial_nodes, angular_nodes};
  for (int i = 0; i < radial_nodes; ++i) {
    const double r = 0.5 * radius * (gl.nodes[i] + 1.0);
    const double w = 0.5 * radius * gl.weights[i] * r * two_pi / angular_nodes;
    for (int j = 0; j < angular_nodes; ++j) {
      // Node at angle 2 pi j / M; only its distance to the center matters.
      const double theta = two_pi * j / angular_nodes;
      const double x = r * std::cos(theta), y = r * std::sin(theta);
      rule.distance.push_back(std::hypot(x, y));
      rule.weights.push_back(w);
    }
  }
  finalize_distances(rule);
  return rule;
}

void check_resolution(const QuadratureRule& rule, double lambda) {
  switch (rule.kind) {
    case QuadratureRule::Kind::torus_grid: {
      const int need = required_torus_points(rule.manifold, lambda);
      if (rule.grid.front() < need)
        fail(ErrorKind::resolution, "torus grid with " + std::to_string(rule.grid.front()) +
                                        " points per axis cannot resolve lambda = " + format_number(lambda) +
                                        "; required " + std::to_string(need));
      break;
    }
    case QuadratureRule::Kind::sphere_gauss: {
      const auto need = static_cast<std::size_t>(std::ceil(2.0 * lambda));
      if (rule.size() < need)
        fail(ErrorKind::resolution, "sphere rule with " + std::to_string(rule.size()) +
                                        " nodes cannot resolve lambda = " + format_number(lambda) +
                                        "; required " + std::to_string(need));
      break;
    }
    case QuadratureRule::Kind::disc_polar: {
      // The rule is centered at x, so only the radial direction oscillates.
      const double radius = rule.unique_distance.empty() ? 0.0 : rule.unique_distance.back();
      const int need = static_cast<int>(std::ceil(4.0 * lambda * radius / two_pi));
      if (rule.grid[0] < need)
        fail(ErrorKind::resolution, "disc rule with " + std::to_string(rule.grid[0]) +
                                        " radial nodes cannot resolve lambda = " + format_number(lambda) +
                                        "; required " + std::to_string(need));
      break;
    }
  }
}

// ---------------------------------------------------------------------------

struct TorusSynthesizer::Impl {
  geometry::Lattice lattice;
  std::vector<int> dims;
  std::size_t nodes = 0;
  std::size_t half_size = 0;
  std::vector<double> frequency;  // per half-spectrum entry, 0 for k = 0
  fftw_complex* in = nullptr;
  double* out = nullptr;
  fftw_plan plan = nullptr;

  ~Impl() {
    std::lock_guard<std::mutex> lock(fftw_mutex);
    if (plan) fftw_destroy_plan(plan);
    if (in) fftw_free(in);
    if (out) fftw_free(out);
  }
};

TorusSynthesizer::TorusSynthesizer(const QuadratureRule& rule) : impl_(std::make_unique<Impl>()) {
  if (rule.kind != QuadratureRule::Kind::torus_grid) fail(ErrorKind::domain, "synthesizer needs a torus grid");
  auto& I = *impl_;
  I.lattice = geometry::torus_lattice(rule.manifold);
  I.dims = rule.grid;
  I.nodes = rule.size();
  const int n = static_cast<int>(I.dims.size());
  const int last_len = I.dims.back() / 2 + 1;
  I.half_size = static_cast<std::size_t>(last_len);
  for (int a = 0; a + 1 < n; ++a) I.half_size *= static_cast<std::size_t>(I.dims[a]);
  I.frequency.resize(I.half_size);
  const geometry::Matrix& dual = I.lattice.dual_basis();
  std::vector<int> k(n);
  for (std::size_t idx = 0; idx < I.half_size; ++idx) {
    std::size_t rest = idx;
    k[n - 1] = static_cast<int>(rest % last_len);
    rest /= last_len;
    for (int a = n - 2; a >= 0; --a) {
      const int N = I.dims[a];
      const int j = static_cast<int>(rest % N);
      rest /= N;
      k[a] = 2 * j > N ? j - N : j;
    }
    double norm2 = 0.0;
    for (int r = 0; r < n; ++r) {
      double c = 0.0;
      for (int a = 0; a < n; ++a) c += dual(r, a) * k[a];
      norm2 += c * c;
    }
    I.frequency[idx] = two_pi * std::sqrt(norm2);
  }
  max_frequency_ = pi * static_cast<double>(*std::min_element(I.dims.begin(), I.dims.end())) /
                   max_column_norm(I.lattice);
  std::lock_guard<std::mutex> lock(fftw_mutex);
  I.in = fftw_alloc_complex(I.half_size);
  I.out = fftw_alloc_real(I.nodes);
  if (!I.in || !I.out) fail(ErrorKind::capacity, "FFT buffers could not be allocated");
  I.plan = fftw_plan_dft_c2r(n, I.dims.data(), I.in, I.out, FFTW_ESTIMATE);
}

TorusSynthesizer::~TorusSynthesizer() = default;

std::vector<double> TorusSynthesizer::synthesize(double below, const std::function<double(double)>& coeff) {
  auto& I = *impl_;
  if (below > max_frequency_) fail(ErrorKind::resolution, "synthesis band exceeds the grid Nyquist frequency");
  std::memset(I.in, 0, sizeof(fftw_complex) * I.half_size);
  const double edge = below * (1.0 - spectra::frequency_tie_tolerance);
  for (std::size_t idx = 0; idx < I.half_size; ++idx) {
    const double f = I.frequency[idx];
    if (f > 0.0 && f < edge) I.in[idx][0] = coeff(f);
  }
  fftw_execute(I.plan);
  return std::vector<double>(I.out, I.out + I.nodes);
}

struct FieldEvaluator::Impl {
  QuadratureRule::Kind kind;
  double lambda_max = 0.0;
  std::size_t nodes = 0;
  std::unique_ptr<TorusSynthesizer> torus;
  double inv_volume = 0.0;

  // sphere: cumulative[i * (m_max + 1) + m] = sum_{1 <= m' <= m}
  int n = 0;
  int m_max = 0;
  std::vector<double> cumulative;
};

FieldEvaluator::FieldEvaluator(const QuadratureRule& rule, double lambda_max) : impl_(std::make_unique<Impl>()) {
  auto& I = *impl_;
  I.kind = rule.kind;
  I.lambda_max = lambda_max;
  I.nodes = rule.size();
  dimension_ = geometry::dimension(rule.manifold);
  check_resolution(rule, lambda_max);
  if (rule.kind == QuadratureRule::Kind::torus_grid) {
    I.torus = std::make_unique<TorusSynthesizer>(rule);
    I.inv_volume = 1.0 / geometry::torus_lattice(rule.manifold).volume();
  } else if (rule.kind == QuadratureRule::Kind::sphere_gauss) {
    I.n = dimension_;
    int m = 0;
    while (std::sqrt(static_cast<double>(m + 1) * (m + 1 + I.n - 1)) < lambda_max) ++m;
    I.m_max = m;
    const std::size_t stride = static_cast<std::size_t>(I.m_max) + 1;
    I.cumulative.assign(I.nodes * stride, 0.0);
    const double dn = specialfn::sphere_area_constant(I.n);
    std::vector<double> mult(stride);
    for (int k = 0; k <= I.m_max; ++k) mult[k] = static_cast<double>(specialfn::multiplicity(I.n, k));
    parallel_for(I.nodes, [&](std::size_t i) {
      const auto p = specialfn::legendre_muller_table(I.n, I.m_max, std::cos(rule.angle[i]));
      CompensatedSum acc;
      double* row = I.cumulative.data() + i * stride;
      row[0] = 0.0;
      for (int k = 1; k <= I.m_max; ++k) {
        acc.add(mult[k] * p[k] / dn);
        row[k] = acc.value();
      }
    });
  }
}

FieldEvaluator::~FieldEvaluator() = default;

std::vector<double> FieldEvaluator::values(double lambda) {
  auto& I = *impl_;
  if (lambda > I.lambda_max) fail(ErrorKind::cutoff, "field requested beyond its lambda_max");
  std::vector<double> result(I.nodes, 0.0);
  if (lambda <= 0.0) return result;
  if (I.kind == QuadratureRule::Kind::torus_grid) {
    const double c = I.inv_volume;
    return I.torus->synthesize(lambda, [c](double) { return c; });
  }
  if (I.kind == QuadratureRule::Kind::sphere_gauss) {
    int m = 0;
    const double edge = lambda * (1.0 - spectra::frequency_tie_tolerance);
    while (m < I.m_max && std::sqrt(static_cast<double>(m + 1) * (m + 1 + I.n - 1)) < edge) ++m;
    const std::size_t stride = static_cast<std::size_t>(I.m_max) + 1;
    for (std::size_t i = 0; i < I.nodes; ++i) result[i] = I.cumulative[i * stride + m];
  }
  return result;
}

std::vector<double> euclidean_term(const QuadratureRule& rule, int n, double lambda) {
  std::vector<double> per_distance(rule.unique_distance.size());
  const double scale = rescale(n, lambda);
  parallel_for(per_distance.size(), [&](std::size_t i) {
    per_distance[i] = scale * spectra::euclidean_N_regular(n, rule.unique_distance[i], lambda);
  });
  std::vector<double> out(rule.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = per_distance[rule.slot[i]];
  return out;
}

// ---------------------------------------------------------------------------

bool ScanReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

const Check* ScanReport::find_check(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

const FitRecord* ScanReport::find_fit(const std::string& name) const {
  for (const auto& f : fits)
    if (f.name == name) return &f;
  return nullptr;
}

Check make_check(std::string name, double measured, std::string op, double threshold) {
  Check c{std::move(name), measured, std::move(op), threshold, false};
  if (c.op == "<=")
    c.pass = measured <= threshold;
  else if (c.op == ">=")
    c.pass = measured >= threshold;
  else
    fail(ErrorKind::domain, "unknown comparison " + c.op);
  return c;
}

namespace {

const std::vector<double>& lookup(const ScanReport& r, const std::string& key) {
  if (auto it = r.grids.find(key); it != r.grids.end()) return it->second;
  if (auto it = r.values.find(key); it != r.values.end()) return it->second;
  fail(ErrorKind::domain, "report has no series named " + key);
}

}  // namespace

FitRecord make_fit(const ScanReport& report, std::string name, std::string x_key, std::string y_key, std::string mode,
                   double x_min, double x_max) {
  const auto& xs = lookup(report, x_key);
  const auto& ys = lookup(report, y_key);
  if (xs.size() != ys.size()) fail(ErrorKind::domain, "fit series lengths differ");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (xs[i] >= x_min && xs[i] <= x_max) {
      x.push_back(xs[i]);
      y.push_back(ys[i]);
    }
  FitRecord rec{std::move(name), std::move(x_key), std::move(y_key), mode, x_min, x_max, {}};
  if (mode == "log-log") {
    rec.fit = fit_log_log(x, y);
  } else if (mode == "lin-log" || mode == "lin-log10") {
    for (double& v : x) v = mode == "lin-log" ? std::log(v) : std::log10(v);
    rec.fit = fit_line(x, y);
  } else {
    fail(ErrorKind::domain, "unknown fit mode " + mode);
  }
  return rec;
}

bool recheck(const ScanReport& report) {
  for (const auto& f : report.fits) {
    const auto again = make_fit(report, f.name, f.x_key, f.y_key, f.mode, f.x_min, f.x_max);
    if (again.fit.slope != f.fit.slope || again.fit.intercept != f.fit.intercept) return false;
  }
  for (const auto& c : report.checks)
    if (make_check(c.name, c.measured, c.op, c.threshold).pass != c.pass) return false;
  return true;
}

nlohmann::ordered_json to_json(const ScanReport& report) {
  nlohmann::ordered_json j;
  j["scan_id"] = report.scan_id;
  j["passed"] = report.passed();
  j["metadata"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.metadata) j["metadata"][k] = v;
  j["grids"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.grids) j["grids"][k] = v;
  j["values"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.values) j["values"][k] = v;
  j["fits"] = nlohmann::ordered_json::array();
  for (const auto& f : report.fits) {
    nlohmann::ordered_json e;
    e["name"] = f.name;
    e["x"] = f.x_key;
    e["y"] = f.y_key;
    e["mode"] = f.mode;
    e["x_min"] = f.x_min;
    e["x_max"] = f.x_max;
    e["slope"] = f.fit.slope;
    e["intercept"] = f.fit.intercept;
    e["slope_stderr"] = f.fit.slope_stderr;
    e["rms_residual"] = f.fit.rms_residual;
    e["r_squared"] = f.fit.r_squared;
    e["count"] = f.fit.count;
    j["fits"].push_back(e);
  }
  j["checks"] = nlohmann::ordered_json::array();
  for (const auto& c : report.checks) {
    nlohmann::ordered_json e;
    e["name"] = c.name;
    e["measured"] = c.measured;
    e["op"] = c.op;
    e["threshold"] = c.threshold;
    e["pass"] = c.pass;
    j["checks"].push_back(e);
  }
  return j;
}

// ---------------------------------------------------------------------------

ScanReport verify_manifold_average(std::span<const double> lambda_grid, const QuadratureRule& rule,
                                   const ManifoldAverageOptions& options) {
  if (lambda_grid.empty()) fail(ErrorKind::config, "empty lambda grid");
  const double lambda_max = *std::max_element(lambda_grid.begin(), lambda_grid.end());
  const int n = geometry::dimension(rule.manifold);
  auto integral_at = [&](FieldEvaluator& field, const QuadratureRule& r, double lambda) {
    const auto N = field.values(lambda);
    const auto E = euclidean_term(r, n, lambda);
    const double scale = rescale(n, lambda);
    std::vector<double> f(N.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double diff = scale * N[i] - options.euclid_scale * E[i];
      f[i] = diff * diff;
    }
    return weighted_sum(r, f);
  };

  ScanReport report;
  report.scan_id = "manifold_average";
  report.metadata["manifold"] = geometry::describe(rule.manifold);
  report.metadata["nodes"] = std::to_string(rule.size());
  report.metadata["euclid_scale"] = format_number(options.euclid_scale);
  FieldEvaluator field(rule, lambda_max);
  std::vector<double> lambdas(lambda_grid.begin(), lambda_grid.end());
  std::vector<double> values;
  for (double lambda : lambdas) values.push_back(integral_at(field, rule, lambda));
  report.grids["lambda"] = lambdas;
  report.values["integral"] = values;
  double sup = 0.0;
  for (double v : values) sup = std::max(sup, v);
  report.checks.push_back(make_check("sup_finite", std::isfinite(sup) ? 1.0 : 0.0, ">=", 1.0));
  const auto in_range = std::count_if(lambdas.begin(), lambdas.end(),
                                      [&](double l) { return l >= options.fit_min && l <= options.fit_max; });
  if (in_range >= 2) {
    report.fits.push_back(
        make_fit(report, "growth", "lambda", "integral", "log-log", options.fit_min, options.fit_max));
    report.checks.push_back(
        make_check("abs_growth_slope", std::fabs(report.fits.back().fit.slope), "<=", options.slope_tolerance));
  }
  report.metadata["sup"] = format_number(sup);
  if (options.refined) {
    FieldEvaluator fine(*options.refined, lambda_max);
    const double refined = integral_at(fine, *options.refined, lambda_max);
    const double coarse = values[std::max_element(lambdas.begin(), lambdas.end()) - lambdas.begin()];
    report.values["refined_integral"] = {refined};
    report.checks.push_back(make_check("refinement_change", std::fabs(refined - coarse) / std::fabs(refined), "<=",
                                       options.refinement_tolerance));
  }
  return report;
}

std::vector<ScanReport> verify_weighted_average(std::span<const double> kappas, std::span<const double> lambda_grid,
                                                const QuadratureRule& rule, double fit_min, double fit_max) {
  if (lambda_grid.empty() || kappas.empty()) fail(ErrorKind::config, "empty kappa or lambda grid");
  for (double k : kappas)
    if (!(k >= 0.0)) fail(ErrorKind::domain, "kappa must be nonnegative");
  const double lambda_max = *std::max_element(lambda_grid.begin(), lambda_grid.end());
  const int n = geometry::dimension(rule.manifold);
  FieldEvaluator field(rule, lambda_max);
  std::vector<std::vector<double>> dist_pow(kappas.size(), std::vector<double>(rule.size()));
  for (std::size_t a = 0; a < kappas.size(); ++a)
    for (std::size_t i = 0; i < rule.size(); ++i) dist_pow[a][i] = std::pow(rule.distance[i], kappas[a]);

  std::vector<std::vector<double>> values(kappas.size());
  for (double lambda : lambda_grid) {
    const auto N = field.values(lambda);
    const double scale = rescale(n, lambda);
    std::vector<double> f(N.size());
    for (std::size_t a = 0; a < kappas.size(); ++a) {
      for (std::size_t i = 0; i < f.size(); ++i) f[i] = dist_pow[a][i] * (scale * N[i]) * (scale * N[i]);
      values[a].push_back(weighted_sum(rule, f));
    }
  }

  std::vector<ScanReport> reports;
  const std::vector<double> lambdas(lambda_grid.begin(), lambda_grid.end());
  for (std::size_t a = 0; a < kappas.size(); ++a) {
    const double kappa = kappas[a];
    ScanReport r;
    r.scan_id = "weighted_average_kappa=" + format_number(kappa);
    r.metadata["manifold"] = geometry::describe(rule.manifold);
    r.metadata["kappa"] = format_number(kappa);
    r.grids["lambda"] = lambdas;
    r.values["integral"] = values[a];
    std::vector<double> weyl;
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
      const double w = std::pow(lambdas[i], 1 - n) * spectra::weyl_leading(n, lambdas[i]);
      weyl.push_back(values[a][i] / w);
    }
    r.values["integral_over_weyl"] = weyl;
    r.fits.push_back(make_fit(r, "growth", "lambda", "integral", "log-log", fit_min, fit_max));
    const double slope = r.fits.back().fit.slope;
    if (kappa < 1.0) {
      r.checks.push_back(make_check("exponent_error", std::fabs(slope - (1.0 - kappa)), "<=", 0.1));
    } else if (kappa > 1.0) {
      r.checks.push_back(make_check("exponent", slope, "<=", 0.1));
    } else {
      std::vector<double> ratio;
      double lo = INFINITY, hi = 0.0;
      for (std::size_t i = 0; i < lambdas.size(); ++i) {
        ratio.push_back(values[a][i] / std::log(lambdas[i]));
        if (lambdas[i] >= fit_min && lambdas[i] <= fit_max) {
          lo = std::min(lo, ratio.back());
          hi = std::max(hi, ratio.back());
        }
      }
      r.values["integral_over_log"] = ratio;
      r.fits.push_back(make_fit(r, "log_fit", "lambda", "integral", "lin-log", fit_min, fit_max));
      r.checks.push_back(make_check("log_ratio_spread", hi / lo, "<=", 3.0));
    }
    reports.push_back(std::move(r));
  }
  return reports;
}

std::vector<ExceptionalSetResult> exceptional_set_measure(const QuadratureRule& rule, double lambda,
                                                          std::span<const double> mus, double C) {
  if (!(C > 0.0)) fail(ErrorKind::domain, "C must be positive");
  for (double mu : mus)
    if (!(mu > 0.0)) fail(ErrorKind::domain, "mu must be positive");
  const int n = geometry::dimension(rule.manifold);
  FieldEvaluator field(rule, lambda);
  const auto N = field.values(lambda);
  const double scale = rescale(n, lambda);
  std::vector<ExceptionalSetResult> out;
  std::vector<double> indicator(N.size());
  for (double mu : mus) {
    for (std::size_t i = 0; i < N.size(); ++i) {
      const double d = rule.distance[i];
      const double threshold = d > 0.0 ? C * (mu + std::pow(d, -0.5 * (n + 1))) : INFINITY;
      indicator[i] = std::fabs(scale * N[i]) >= threshold ? 1.0 : 0.0;
    }
    const double m = weighted_sum(rule, indicator);
    out.push_back({lambda, mu, C, m, m * C * C * mu * mu});
  }
  return out;
}

ScanReport exceptional_set_scan(const QuadratureRule& rule, std::span<const double> lambdas,
                                std::span<const double> mus, double C) {
  ScanReport r;
  r.scan_id = "exceptional_set";
  r.metadata["manifold"] = geometry::describe(rule.manifold);
  r.metadata["C"] = format_number(C);
  r.grids["lambda"] = std::vector<double>(lambdas.begin(), lambdas.end());
  r.grids["mu"] = std::vector<double>(mus.begin(), mus.end());
  double worst = 0.0;
  for (double lambda : lambdas) {
    const auto res = exceptional_set_measure(rule, lambda, mus, C);
    std::vector<double> m, s;
    for (const auto& e : res) {
      m.push_back(e.measure);
      s.push_back(e.scaled);
      worst = std::max(worst, e.scaled);
    }
    const std::string tag = "lambda=" + format_number(lambda);
    r.values["measure_" + tag] = m;
    r.values["scaled_" + tag] = s;
  }
  r.checks.push_back(make_check("scaled_max_finite", std::isfinite(worst) ? 1.0 : 0.0, ">=", 1.0));
  r.metadata["scaled_max"] = format_number(worst);
  return r;
}

ScanReport sequence_corollary_check(const QuadratureRule& rule, std::span<const double> taus,
                                    std::span<const double> mus, std::span<const double> thresholds) {
  if (taus.size() != mus.size() || taus.empty()) fail(ErrorKind::config, "tau and mu sequences must match");
  for (std::size_t k = 1; k < mus.size(); ++k)
    if (!(mus[k] > mus[k - 1])) fail(ErrorKind::domain, "mu_k must be increasing");
  const int n = geometry::dimension(rule.manifold);
  const double tau_max = *std::max_element(taus.begin(), taus.end());
  FieldEvaluator field(rule, tau_max);
  const std::size_t K = taus.size();
  // ratio[k][i] = |N~_i(tau_k)| / mu_k
  std::vector<std::vector<double>> ratio(K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto N = field.values(taus[k]);
    const double scale = rescale(n, taus[k]);
    ratio[k].resize(N.size());
    for (std::size_t i = 0; i < N.size(); ++i) ratio[k][i] = std::fabs(scale * N[i]) / mus[k];
  }
  const double vol = rule.total_weight();
  ScanReport r;
  r.scan_id = "sequence_corollary";
  r.metadata["manifold"] = geometry::describe(rule.manifold);
  std::vector<double> Ks;
  for (std::size_t k = 1; k <= K; ++k) Ks.push_back(static_cast<double>(k));
  r.grids["K"] = Ks;
  r.grids["tau"] = std::vector<double>(taus.begin(), taus.end());
  r.grids["mu"] = std::vector<double>(mus.begin(), mus.end());
  r.grids["t"] = std::vector<double>(thresholds.begin(), thresholds.end());
  std::vector<double> indicator(rule.size());
  for (double t : thresholds) {
    std::vector<double> prefix, tail(K);
    std::vector<double> running(rule.size(), 0.0);
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t i = 0; i < running.size(); ++i) {
        running[i] = std::max(running[i], ratio[k][i]);
        indicator[i] = running[i] > t ? 1.0 : 0.0;
      }
      prefix.push_back(weighted_sum(rule, indicator) / vol);
    }
    std::fill(running.begin(), running.end(), 0.0);
    for (std::size_t k = K; k-- > 0;) {
      for (std::size_t i = 0; i < running.size(); ++i) {
        running[i] = std::max(running[i], ratio[k][i]);
        indicator[i] = running[i] > t ? 1.0 : 0.0;
      }
      tail[k] = weighted_sum(rule, indicator) / vol;
    }
    r.values["fraction_t=" + format_number(t)] = prefix;
    r.values["tail_fraction_t=" + format_number(t)] = tail;
  }
  return r;
}

// ---------------------------------------------------------------------------

bool non_conjugate(const geometry::PointPair& pair) {
  if (std::holds_alternative<geometry::Sphere>(pair.manifold)) return pair.angle > 1e-12 && pair.angle < pi - 1e-12;
  if (std::holds_alternative<geometry::Euclidean>(pair.manifold)) return pair.distance > 0.0;
  return geometry::torus_distance(geometry::torus_lattice(pair.manifold), pair.displacement) > 1e-12;
}

namespace {

// int_a^b mu^r dmu for 0 < a <= b.
double power_integral(double a, double b, double r) {
  if (b <= a) return 0.0;
  const double e = r + 1.0;
  const double t = std::log1p((b - a) / a);
  if (std::fabs(e) < 1e-14) return t;
  return std::pow(a, e) * std::expm1(e * t) / e;
}

// Walk the gaps of the step function N and hand every piece [a, b] with its
// level to `piece`, stopping at each grid point in turn.
template <class Piece, class Mark>
void walk_steps(const spectra::SpectralSeries& series, double start, std::span<const double> grid, Piece&& piece,
                Mark&& mark) {
  const auto& atoms = series.atoms();
  // j counts atoms <= a, so the level just above a is partial_sum(j).
  std::size_t j = 0;
  while (j < atoms.size() && atoms[j].frequency <= start) ++j;
  double a = start;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double target = grid[g];
    while (a < target) {
      const double next = j < atoms.size() ? std::min(atoms[j].frequency, target) : target;
      if (next > a) piece(a, next, series.partial_sum(j));
      a = next;
      if (j < atoms.size() && atoms[j].frequency <= a) ++j;
    }
    mark(g);
  }
}

}  // namespace

ScanReport verify_lower_bound(const spectra::SpectralSeries& series, std::span<const double> lambda_grid,
                              const LowerBoundOptions& options) {
  if (lambda_grid.empty()) fail(ErrorKind::config, "empty lambda grid");
  if (!(options.q >= 0.0) || !(options.p >= 1.0)) fail(ErrorKind::domain, "need q >= 0 and p >= 1");
  std::vector<double> grid(lambda_grid.begin(), lambda_grid.end());
  if (!std::is_sorted(grid.begin(), grid.end()) || grid.front() <= 0.0)
    fail(ErrorKind::domain, "lambda grid must be positive and ascending");
  if (grid.back() > series.cutoff()) fail(ErrorKind::cutoff, "lambda grid exceeds the series cutoff");
  const int n = series.dimension();
  const double r = options.q + options.p * 0.5 * (1 - n);
  CompensatedSum acc;
  std::vector<double> avg(grid.size());
  // The integrand vanishes below the first eigenvalue, so starting at a tiny
  // positive point keeps negative powers integrable.
  const double start = std::min(grid.front(), series.atoms().empty() ? grid.front() : series.atoms().front().frequency);
  walk_steps(
      series, start, grid,
      [&](double a, double b, double level) {
        if (level != 0.0) acc.add(std::pow(std::fabs(level), options.p) * power_integral(a, b, r));
      },
      [&](std::size_t g) { avg[g] = acc.value() * std::pow(grid[g], -options.q - 1.0); });

  ScanReport rep;
  rep.scan_id = "lower_bound";
  rep.metadata["provenance"] = series.provenance();
  rep.metadata["q"] = format_number(options.q);
  rep.metadata["p"] = format_number(options.p);
  rep.grids["lambda"] = grid;
  rep.values["running_average"] = avg;
  const double window_min = options.window_min > 0.0 ? options.window_min : grid[grid.size() / 2];
  double lo = INFINITY, mean = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (grid[i] >= window_min) {
      lo = std::min(lo, avg[i]);
      mean += avg[i];
      ++count;
    }
  mean /= static_cast<double>(std::max<std::size_t>(count, 1));
  rep.checks.push_back(make_check("window_min", lo, ">=", options.min_threshold));
  rep.fits.push_back(make_fit(rep, "trend", "lambda", "running_average", "lin-log10", window_min, grid.back()));
  rep.checks.push_back(make_check("trend_slope", rep.fits.back().fit.slope, ">=", -options.trend_tolerance * mean));
  return rep;
}

ScanReport verify_lower_bound(const geometry::PointPair& pair, std::span<const double> lambda_grid,
                              const LowerBoundOptions& options) {
  if (!non_conjugate(pair)) fail(ErrorKind::conjugate, "lower bound needs a non-conjugate pair");
  if (lambda_grid.empty()) fail(ErrorKind::config, "empty lambda grid");
  const double top = *std::max_element(lambda_grid.begin(), lambda_grid.end());
  return verify_lower_bound(spectra::build_series(pair, top), lambda_grid, options);
}

ScanReport log_divergence_check(const spectra::SpectralSeries& series, double lambda_max,
                                const LogDivergenceOptions& options) {
  if (lambda_max > series.cutoff()) fail(ErrorKind::cutoff, "lambda_max exceeds the series cutoff");
  if (!(lambda_max > std::exp(1.0))) fail(ErrorKind::domain, "lambda_max must exceed e");
  if (!(options.epsilon > 0.0)) fail(ErrorKind::domain, "epsilon must be positive");
  const int n = series.dimension();
  const double eps = options.epsilon;
  std::vector<double> grid;
  for (int k = 1;; ++k) {
    const double x = std::pow(10.0, k / 16.0);
    if (x >= lambda_max) break;
    grid.push_back(x);
  }
  grid.push_back(lambda_max);

  CompensatedSum I, J;
  std::vector<double> Iv(grid.size()), Jv(grid.size());
  const auto& gl = gauss_legendre(8);
  auto j_piece = [&](double a, double b, double level2) {
    // Substitute v = ln mu: integrand level^2 e^{(1-n) v} v^{-1-eps}.
    const double va = std::log(a), vb = std::log(b);
    if (n == 1) {
      J.add(level2 * (std::pow(va, -eps) - std::pow(vb, -eps)) / eps);
      return;
    }
    const int panels = std::max(1, static_cast<int>(std::ceil((vb - va) / 0.25)));
    const double h = (vb - va) / panels;
    for (int p = 0; p < panels; ++p) {
      const double lo = va + p * h;
      for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
        const double v = lo + 0.5 * h * (gl.nodes[q] + 1.0);
        J.add(level2 * 0.5 * h * gl.weights[q] * std::exp((1 - n) * v) * std::pow(v, -1 - eps));
      }
    }
  };
  walk_steps(
      series, 1.0, grid,
      [&](double a, double b, double level) {
        if (level == 0.0) return;
        const double level2 = level * level;
        I.add(level2 * power_integral(a, b, -static_cast<double>(n)));
        const double e = std::exp(1.0);
        if (b > e) j_piece(std::max(a, e), b, level2);
      },
      [&](std::size_t g) {
        Iv[g] = I.value();
        Jv[g] = J.value();
      });

  ScanReport rep;
  rep.scan_id = "log_divergence";
  rep.metadata["provenance"] = series.provenance();
  rep.metadata["epsilon"] = format_number(eps);
  rep.grids["lambda"] = grid;
  rep.values["I"] = Iv;
  rep.values["J"] = Jv;
  std::vector<double> decades, increments;
  double prev = 0.0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double lg = std::log10(grid[g]);
    if (std::fabs(lg - std::round(lg)) < 1e-12) {
      if (!decades.empty()) increments.push_back(Jv[g] - prev);
      decades.push_back(grid[g]);
      prev = Jv[g];
    }
  }
  rep.values["J_decade_increment"] = increments;
  if (series.atoms().empty()) {
    rep.checks.push_back(make_check("I_max", Iv.back(), "<=", 0.0));
    return rep;
  }
  rep.fits.push_back(make_fit(rep, "I_vs_log", "lambda", "I", "lin-log", options.fit_min, lambda_max));
  rep.checks.push_back(make_check("I_log_r_squared", rep.fits.back().fit.r_squared, ">=", options.r2_threshold));
  double worst = -INFINITY;
  for (std::size_t k = 1; k < increments.size(); ++k) worst = std::max(worst, increments[k] - increments[k - 1]);
  if (increments.size() >= 2) rep.checks.push_back(make_check("J_increment_growth", worst, "<=", 0.0));
  return rep;
}

}  // namespace sflab::harness
