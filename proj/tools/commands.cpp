#include "commands.hpp"

#include <algorithm>
#include <array>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

#include "sflab/apx.hpp"
#include "sflab/error.hpp"
#include "sflab/geometry.hpp"
#include "sflab/harness.hpp"
#include "sflab/numeric.hpp"
#include "sflab/spectra.hpp"
#include "sflab/zeta.hpp"

namespace sflab::cli {

namespace fs = std::filesystem;
using geometry::ModelManifold;
using geometry::PointPair;

namespace {

[[noreturn]] void bad(const std::string& what) { fail(ErrorKind::config, what); }

const Config& section(const Config& config, const char* name) {
  if (!config.contains(name) || !config[name].is_object()) bad(std::string("missing section \"") + name + "\"");
  return config[name];
}

double number(const Config& j, const char* key, const std::string& where) {
  if (!j.contains(key)) bad(where + ": missing \"" + key + "\"");
  if (!j[key].is_number()) bad(where + ": \"" + key + "\" must be a number");
  return j[key].get<double>();
}

double number_or(const Config& j, const char* key, double fallback, const std::string& where) {
  return j.contains(key) ? number(j, key, where) : fallback;
}

int integer(const Config& j, const char* key, const std::string& where) {
  if (!j.contains(key)) bad(where + ": missing \"" + key + "\"");
  if (!j[key].is_number_integer()) bad(where + ": \"" + key + "\" must be an integer");
  return j[key].get<int>();
}

int integer_or(const Config& j, const char* key, int fallback, const std::string& where) {
  return j.contains(key) ? integer(j, key, where) : fallback;
}

std::vector<double> number_list(const Config& v, const std::string& where) {
  if (!v.is_array()) bad(where + " must be a list of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) bad(where + " must be a list of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

// A list of values, {"min", "max", "step"} or {"min", "max", "count", "log"}.
std::vector<double> grid(const Config& v, const std::string& where) {
  if (v.is_array()) return number_list(v, where);
  if (!v.is_object()) bad(where + " must be a list or a range object");
  const double lo = number(v, "min", where);
  const double hi = number(v, "max", where);
  if (!(hi >= lo)) bad(where + ": max must be >= min");
  if (v.contains("step")) {
    const double step = number(v, "step", where);
    if (!(step > 0)) bad(where + ": step must be positive");
    const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = lo + static_cast<double>(i) * step;
    return out;
  }
  const int count = integer(v, "count", where);
  if (count < 1) bad(where + ": count must be >= 1");
  const bool log = v.contains("log") && v["log"].is_boolean() && v["log"].get<bool>();
  if (log && !(lo > 0)) bad(where + ": log range needs min > 0");
  return log ? logspace(lo, hi, static_cast<std::size_t>(count)) : linspace(lo, hi, static_cast<std::size_t>(count));
}

std::vector<double> grid_at(const Config& j, const char* key, const std::string& where) {
  if (!j.contains(key)) bad(where + ": missing \"" + key + "\"");
  auto g = grid(j[key], where + "." + key);
  if (g.empty()) bad(where + "." + key + " is empty");
  return g;
}

ModelManifold parse_manifold(const Config& config) {
  if (!config.contains("manifold")) bad("missing \"manifold\"");
  const auto& m = config["manifold"];
  if (!m.is_object() || !m.contains("type") || !m["type"].is_string()) bad("manifold needs a \"type\" string");
  const auto type = m["type"].get<std::string>();
  ModelManifold out;
  if (type == "circle") {
    out = geometry::Circle{};
  } else if (type == "square_torus") {
    out = geometry::SquareTorus{integer_or(m, "n", 2, "manifold")};
  } else if (type == "flat_torus2") {
    if (!m.contains("basis") || !m["basis"].is_array() || m["basis"].size() != 2) {
      bad("flat_torus2 needs \"basis\": two generator vectors");
    }
    Eigen::Matrix2d b;
    for (int c = 0; c < 2; ++c) {
      const auto col = number_list(m["basis"][c], "manifold.basis");
      if (col.size() != 2) bad("manifold.basis vectors must have two entries");
      b(0, c) = col[0];
      b(1, c) = col[1];
    }
    out = geometry::FlatTorus2{b};
  } else if (type == "sphere") {
    out = geometry::Sphere{integer_or(m, "n", 2, "manifold")};
  } else if (type == "euclidean") {
    out = geometry::Euclidean{integer_or(m, "n", 2, "manifold")};
  } else {
    bad("unknown manifold type \"" + type + "\"");
  }
  try {
    geometry::validate(out);
  } catch (const Error& e) {
    bad(std::string("manifold: ") + e.what());
  }
  return out;
}

PointPair parse_pair(const Config& config, const ModelManifold& m) {
  if (!config.contains("pair") || !config["pair"].is_object()) bad("missing \"pair\"");
  const auto& p = config["pair"];
  if (std::holds_alternative<geometry::Circle>(m)) {
    if (p.contains("displacement")) {
      const auto v = number_list(p["displacement"], "pair.displacement");
      if (v.size() != 1) bad("pair.displacement must have one entry on the circle");
      return geometry::make_circle_pair(v[0]);
    }
    return geometry::make_circle_pair(number(p, "distance", "pair"));
  }
  if (geometry::is_torus(m)) {
    if (!p.contains("displacement")) bad("pair: missing \"displacement\"");
    const auto v = number_list(p["displacement"], "pair.displacement");
    const int n = geometry::dimension(m);
    if (static_cast<int>(v.size()) != n) bad("pair.displacement must have " + std::to_string(n) + " entries");
    return geometry::make_torus_pair(m, Eigen::Map<const geometry::Vector>(v.data(), n));
  }
  if (const auto* s = std::get_if<geometry::Sphere>(&m)) return geometry::make_sphere_pair(s->n, number(p, "angle", "pair"));
  return geometry::make_euclidean_pair(geometry::dimension(m), number(p, "distance", "pair"));
}

spectra::SeriesOptions series_options(const Config& config) {
  spectra::SeriesOptions o;
  if (config.contains("include_zero_mode")) {
    if (!config["include_zero_mode"].is_boolean()) bad("include_zero_mode must be a boolean");
    o.include_zero_mode = config["include_zero_mode"].get<bool>();
  }
  return o;
}

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const Config& config, const std::string& header) : out_(path) {
    if (!out_) fail(ErrorKind::config, "cannot write " + path.string());
    out_ << "# config-hash: " << config_hash_hex(config) << "\n" << header << "\n";
  }
  void row(std::initializer_list<double> values) {
    bool first = true;
    for (double v : values) {
      if (!first) out_ << ',';
      out_ << num(v);
      first = false;
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::config, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

void prepare(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) bad("cannot create output directory " + out.string());
}

harness::QuadratureRule parse_rule(const ModelManifold& m, const Config& check, double lambda_max,
                                   const std::string& where) {
  if (geometry::is_torus(m)) {
    const int fallback = harness::required_torus_points(m, lambda_max);
    return harness::torus_grid_rule(m, integer_or(check, "grid_points", fallback, where));
  }
  if (const auto* s = std::get_if<geometry::Sphere>(&m)) {
    const int fallback = static_cast<int>(std::ceil(2.0 * lambda_max)) + 8;
    return harness::sphere_gauss_rule(s->n, integer_or(check, "nodes", fallback, where));
  }
  const auto* e = std::get_if<geometry::Euclidean>(&m);
  if (e && e->n == 2) {
    const double radius = number_or(check, "radius", 1.0, where);
    const int fallback = static_cast<int>(std::ceil(4.0 * lambda_max * radius / two_pi)) + 8;
    return harness::disc_polar_rule(radius, integer_or(check, "radial_nodes", fallback, where),
                                    integer_or(check, "angular_nodes", 64, where));
  }
  bad(where + ": no quadrature rule on " + geometry::describe(m));
}

double max_of(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

}  // namespace

std::uint64_t config_hash(const Config& config) {
  nlohmann::json canonical = nlohmann::json::parse(config.dump());
  if (canonical.is_object()) {
    canonical.erase("threads");
    canonical.erase("out");
  }
  const std::string text = canonical.dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string config_hash_hex(const Config& config) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, config_hash(config));
  return buf;
}

Config load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) bad("cannot read config " + path.string());
  try {
    Config c = Config::parse(in);
    if (!c.is_object()) bad("config must be a JSON object");
    return c;
  } catch (const nlohmann::json::parse_error& e) {
    bad(std::string("config parse: ") + e.what());
  }
}

int cmd_spectral(const Config& config, const fs::path& out, std::ostream& log) {
  const auto m = parse_manifold(config);
  const auto pair = parse_pair(config, m);
  const auto& sec = section(config, "spectral");
  auto lambdas = grid_at(sec, "lambda", "spectral");
  const int extra = integer_or(sec, "random_samples", 0, "spectral");
  if (extra < 0) bad("spectral.random_samples must be >= 0");
  if (extra > 0) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(integer_or(config, "seed", 0, "config")));
    std::uniform_real_distribution<double> u(lambdas.front(), max_of(lambdas));
    for (int i = 0; i < extra; ++i) lambdas.push_back(u(rng));
    std::sort(lambdas.begin(), lambdas.end());
  }
  const double cutoff = number_or(sec, "cutoff", max_of(lambdas), "spectral");
  const auto series = spectra::build_series(pair, cutoff, series_options(config));
  const int n = series.dimension();

  std::vector<std::array<double, 4>> rows(lambdas.size());
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    const double lam = lambdas[i];
    const double N = spectra::evaluate_N(series, lam);
    rows[i] = {lam, N, spectra::evaluate_rescaled(series, lam).value, spectra::euclidean_N_regular(n, pair.distance, lam)};
  }
  prepare(out);
  CsvWriter csv(out / "spectral.csv", config, "lambda,N,N_rescaled,N_euclid");
  for (const auto& r : rows) csv.row({r[0], r[1], r[2], r[3]});
  log << "spectral: " << rows.size() << " rows, " << series.atoms().size() << " atoms\n";
  return pass;
}

int cmd_apx(const Config& config, const fs::path& out, std::ostream& log) {
  const auto m = parse_manifold(config);
  const auto pair = parse_pair(config, m);
  const auto& sec = section(config, "apx");
  const bool by_K = sec.contains("K");
  if (!by_K && !sec.contains("Q")) bad("apx: missing \"Q\"");
  if (by_K && !std::holds_alternative<geometry::Sphere>(m)) bad("apx.K applies to spheres only");
  const auto params = number_list(by_K ? sec["K"] : sec["Q"], by_K ? "apx.K" : "apx.Q");
  if (params.empty()) bad(by_K ? "apx.K is empty" : "apx.Q is empty");
  const auto horizons = grid_at(sec, "T", "apx");
  if (!std::is_sorted(horizons.begin(), horizons.end()) || !(horizons.front() > 1.0)) {
    bad("apx.T must be ascending and > 1");
  }
  const double cutoff = number_or(sec, "cutoff", horizons.back(), "apx");
  const auto series = spectra::build_series(pair, cutoff, series_options(config));

  struct Row {
    double param;
    std::size_t terms;
    std::vector<double> history;
  };
  std::vector<Row> rows;
  for (double q : params) {
    apx::ApExpansion e;
    if (by_K) {
      if (q < 0 || q != std::floor(q)) bad("apx.K entries must be nonnegative integers");
      e = apx::sphere_expansion(std::get<geometry::Sphere>(m).n, pair.angle, static_cast<int>(q));
    } else {
      if (!(q > 0)) bad("apx.Q entries must be positive");
      e = apx::expansion_for_pair(pair, q);
    }
    rows.push_back({q, e.terms.size(), apx::b2_residual_history(series, e, horizons)});
  }
  prepare(out);
  CsvWriter csv(out / "apx.csv", config, by_K ? "T,K,terms,residual" : "T,Q,terms,residual");
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    for (const auto& r : rows) csv.row({horizons[h], r.param, static_cast<double>(r.terms), r.history[h]});
  }
  log << "apx: " << rows.size() * horizons.size() << " rows\n";
  return pass;
}

int cmd_besicovitch(const Config& config, const fs::path& out, std::ostream& log) {
  const auto m = parse_manifold(config);
  const auto pair = parse_pair(config, m);
  const auto& sec = section(config, "besicovitch");
  const double T = number(sec, "T", "besicovitch");
  const auto ps = sec.contains("p") ? number_list(sec["p"], "besicovitch.p") : std::vector<double>{2.0};
  if (ps.empty()) bad("besicovitch.p is empty");
  const double density = number_or(sec, "samples_per_unit", 64.0, "besicovitch");
  const double cutoff = number_or(sec, "cutoff", T, "besicovitch");
  const auto series = spectra::build_series(pair, cutoff, series_options(config));
  apx::ApExpansion e;
  const bool subtract = sec.contains("Q");
  if (subtract) e = apx::expansion_for_pair(pair, number(sec, "Q", "besicovitch"));
  auto f = [&](double lam) {
    const double v = spectra::evaluate_rescaled(series, lam).value;
    return subtract ? v - apx::eval_expansion(e, lam) : v;
  };
  prepare(out);
  CsvWriter csv(out / "besicovitch.csv", config, "T,p,seminorm");
  for (double p : ps) {
    const auto est = apx::besicovitch_seminorm(f, p, T, density, subtract ? e.max_frequency() : 0.0);
    for (std::size_t i = 0; i < est.history.size(); ++i) csv.row({est.history_T[i], p, est.history[i]});
  }
  log << "besicovitch: " << ps.size() << " exponents\n";
  return pass;
}

namespace {

std::vector<harness::ScanReport> run_check(const ModelManifold& m, const Config& config, const Config& check,
                                           const std::string& where) {
  if (!check.is_object() || !check.contains("kind") || !check["kind"].is_string()) bad(where + " needs a \"kind\"");
  const auto kind = check["kind"].get<std::string>();
  if (kind == "manifold_average") {
    const auto lambdas = grid_at(check, "lambda", where);
    const auto rule = parse_rule(m, check, max_of(lambdas), where);
    harness::ManifoldAverageOptions o;
    o.euclid_scale = number_or(check, "euclid_scale", 1.0, where);
    o.slope_tolerance = number_or(check, "slope_tolerance", o.slope_tolerance, where);
    o.fit_min = number_or(check, "fit_min", o.fit_min, where);
    o.fit_max = number_or(check, "fit_max", o.fit_max, where);
    o.refinement_tolerance = number_or(check, "refinement_tolerance", o.refinement_tolerance, where);
    harness::QuadratureRule fine;
    if (check.contains("refine_points")) {
      Config sub = check;
      sub["grid_points"] = check["refine_points"];
      sub["nodes"] = check["refine_points"];
      sub["radial_nodes"] = check["refine_points"];
      fine = parse_rule(m, sub, max_of(lambdas), where);
      o.refined = &fine;
    }
    return {harness::verify_manifold_average(lambdas, rule, o)};
  }
  if (kind == "weighted_average") {
    const auto lambdas = grid_at(check, "lambda", where);
    const auto kappas = number_list(check.value("kappas", Config::array()), where + ".kappas");
    if (kappas.empty()) bad(where + ".kappas is empty");
    const auto rule = parse_rule(m, check, max_of(lambdas), where);
    return harness::verify_weighted_average(kappas, lambdas, rule, number_or(check, "fit_min", 50.0, where),
                                            number_or(check, "fit_max", 1e300, where));
  }
  if (kind == "exceptional_set") {
    const auto lambdas = grid_at(check, "lambda", where);
    const auto mus = grid_at(check, "mu", where);
    const auto rule = parse_rule(m, check, max_of(lambdas), where);
    return {harness::exceptional_set_scan(rule, lambdas, mus, number(check, "C", where))};
  }
  if (kind == "sequence_corollary") {
    const auto taus = grid_at(check, "tau", where);
    const auto mus = grid_at(check, "mu", where);
    const auto thresholds = grid_at(check, "thresholds", where);
    const auto rule = parse_rule(m, check, max_of(taus), where);
    return {harness::sequence_corollary_check(rule, taus, mus, thresholds)};
  }
  if (kind == "lower_bound") {
    const auto pair = parse_pair(config, m);
    const auto lambdas = grid_at(check, "lambda", where);
    harness::LowerBoundOptions o;
    o.q = number_or(check, "q", o.q, where);
    o.p = number_or(check, "p", o.p, where);
    o.min_threshold = number_or(check, "min_threshold", o.min_threshold, where);
    o.trend_tolerance = number_or(check, "trend_tolerance", o.trend_tolerance, where);
    o.window_min = number_or(check, "window_min", o.window_min, where);
    return {harness::verify_lower_bound(pair, lambdas, o)};
  }
  if (kind == "log_divergence") {
    const auto pair = parse_pair(config, m);
    const double lambda_max = number(check, "lambda_max", where);
    harness::LogDivergenceOptions o;
    o.epsilon = number_or(check, "epsilon", o.epsilon, where);
    o.fit_min = number_or(check, "fit_min", o.fit_min, where);
    o.r2_threshold = number_or(check, "r2_threshold", o.r2_threshold, where);
    const auto series = spectra::build_series(pair, lambda_max, series_options(config));
    return {harness::log_divergence_check(series, lambda_max, o)};
  }
  if (kind == "zeta_average") {
    const auto s = grid_at(check, "s", where);
    const double t = number(check, "t", where);
    const double cap = number_or(check, "sphere_cutoff", 2000.0, where);
    const auto rule = parse_rule(m, check, 0.0, where);
    return {zeta::zeta_manifold_average(rule, t, s, number_or(check, "eps", 0.1, where), cap)};
  }
  bad(where + ": unknown kind \"" + kind + "\"");
}

}  // namespace

int cmd_verify(const Config& config, const fs::path& out, std::ostream& log) {
  const auto m = parse_manifold(config);
  const auto& sec = section(config, "verify");
  if (!sec.contains("checks") || !sec["checks"].is_array() || sec["checks"].empty()) {
    bad("verify.checks must be a non-empty list");
  }
  // Parse everything up front so a bad entry fails before any compute.
  for (std::size_t i = 0; i < sec["checks"].size(); ++i) {
    const auto& c = sec["checks"][i];
    if (!c.is_object() || !c.contains("kind") || !c["kind"].is_string()) {
      bad("verify.checks[" + std::to_string(i) + "] needs a \"kind\"");
    }
  }
  prepare(out);
  nlohmann::ordered_json summary;
  summary["config_hash"] = config_hash_hex(config);
  summary["reports"] = nlohmann::ordered_json::array();
  bool all = true;
  for (std::size_t i = 0; i < sec["checks"].size(); ++i) {
    const auto& c = sec["checks"][i];
    const std::string where = "verify.checks[" + std::to_string(i) + "]";
    const auto reports = run_check(m, config, c, where);
    for (std::size_t r = 0; r < reports.size(); ++r) {
      std::string file = "verify_" + std::to_string(i) + "_" + c["kind"].get<std::string>();
      if (reports.size() > 1) file += "_" + std::to_string(r);
      file += ".json";
      auto j = harness::to_json(reports[r]);
      write_json(out / file, j);
      const bool ok = reports[r].passed();
      all = all && ok;
      summary["reports"].push_back({{"file", file}, {"scan_id", reports[r].scan_id}, {"passed", ok}});
      log << (ok ? "PASS " : "FAIL ") << reports[r].scan_id << "\n";
      for (const auto& ch : reports[r].checks) {
        if (!ch.pass) log << "  " << ch.name << " = " << ch.measured << " (" << ch.op << " " << ch.threshold << ")\n";
      }
    }
  }
  summary["passed"] = all;
  write_json(out / "verify_summary.json", summary);
  return all ? pass : check_failure;
}

int cmd_zeta(const Config& config, const fs::path& out, std::ostream& log) {
  const auto m = parse_manifold(config);
  const auto pair = parse_pair(config, m);
  const auto& sec = section(config, "zeta");
  const double t = number(sec, "t", "zeta");
  const auto s = sec.contains("s") ? grid(sec["s"], "zeta.s") : linspace(-200.0, 200.0, 401);
  const double tol = number_or(sec, "tol", 1e-10, "zeta");
  std::string method = sec.value("method", std::string("auto"));
  const bool circle = std::holds_alternative<geometry::Circle>(m);
  if (method == "auto") method = circle ? "accelerated" : "direct";
  if (method != "direct" && method != "accelerated") bad("zeta.method must be auto, direct or accelerated");
  if (method == "accelerated" && !circle) bad("zeta: the accelerated method is available on the circle only");
  const int n = geometry::dimension(m);
  zeta::ZetaScan scan;
  if (method == "accelerated") {
    if (!(t > 0)) fail(ErrorKind::regime, "accelerated sum needs t > 0");
    scan = zeta::zeta_growth_scan_circle(pair.distance, t, s, tol);
  } else {
    if (!(t > n + zeta::default_margin)) {
      fail(ErrorKind::regime, "direct sum needs t > " + num(n + zeta::default_margin) + ", got t = " + num(t));
    }
    const auto series = spectra::build_series(pair, number(sec, "cutoff", "zeta"), series_options(config));
    scan = zeta::zeta_growth_scan(series, t, s, tol);
  }
  const auto report = zeta::to_report(scan, "zeta_t=" + num(t));
  prepare(out);
  CsvWriter csv(out / "zeta.csv", config, "s,re,im,abs,tail_bound,cutoff");
  for (const auto& p : scan.values) {
    csv.row({p.s, p.value.real(), p.value.imag(), std::abs(p.value), p.tail_bound, p.cutoff});
  }
  write_json(out / "zeta.json", harness::to_json(report));
  log << (report.passed() ? "PASS " : "FAIL ") << report.scan_id << "\n";
  return report.passed() ? pass : check_failure;
}

int run_command(const std::string& name, const Config& config, const fs::path& out, std::ostream& log) {
  try {
    if (config.contains("threads")) {
      if (!config["threads"].is_number_integer() || config["threads"].get<int>() < 1) bad("threads must be >= 1");
      set_thread_count(config["threads"].get<unsigned>());
    }
    if (name == "spectral") return cmd_spectral(config, out, log);
    if (name == "apx") return cmd_apx(config, out, log);
    if (name == "besicovitch") return cmd_besicovitch(config, out, log);
    if (name == "verify") return cmd_verify(config, out, log);
    if (name == "zeta") return cmd_zeta(config, out, log);
    bad("unknown command \"" + name + "\"");
  } catch (const Error& e) {
    log << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::config:
      case ErrorKind::domain:
        return config_error;
      default:
        return regime_error;
    }
  } catch (const nlohmann::json::exception& e) {
    log << "config error: " << e.what() << "\n";
    return config_error;
  }
}

}  // namespace sflab::cli
