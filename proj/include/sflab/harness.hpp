#pragma once

// Numerical harnesses for the integrated and time-averaged bounds on the
// rescaled spectral function, and the report format they share.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sflab/geometry.hpp"
#include "sflab/numeric.hpp"
#include "sflab/spectra.hpp"

namespace sflab::harness {

/// Nodes y with weights for integrals over M against dy. On tori the nodes
/// are the uniform grid x - B u, u in (Z/N)^n; on spheres the polar angles of
/// a Gauss rule; on the disc a tensor polar rule.
struct QuadratureRule {
  enum class Kind { torus_grid, sphere_gauss, disc_polar };
  Kind kind = Kind::torus_grid;
  geometry::ModelManifold manifold;
  std::vector<int> grid;          // torus: points per axis
  std::vector<double> distance;   // d_{x,y} per node
  std::vector<double> weights;
  std::vector<double> angle;      // sphere: polar angle per node
  std::vector<double> unique_distance;   // sorted distinct distances
  std::vector<std::uint32_t> slot;       // node -> index into unique_distance

  std::size_t size() const noexcept { return weights.size(); }
  double total_weight() const;
};

/// Grid with `points_per_axis` nodes on each torus axis (dimension <= 3).
QuadratureRule torus_grid_rule(const geometry::ModelManifold& torus, int points_per_axis);
/// Smallest grid resolving the wavelength 2 pi / lambda with 4 nodes per axis.
int required_torus_points(const geometry::ModelManifold& torus, double lambda);
/// Gauss-Legendre in the polar angle with weights D_{n-1} sin^{n-1}(s).
QuadratureRule sphere_gauss_rule(int n, int nodes);
/// Disc |y| < radius in R^2: Gauss-Legendre in r times uniform angles.
QuadratureRule disc_polar_rule(double radius, int radial_nodes, int angular_nodes);

/// Throws a resolution error naming the required node count when `rule`
/// cannot resolve oscillations at frequency lambda.
void check_resolution(const QuadratureRule& rule, double lambda);

/// Sums coeff(f) cos(2 pi <k, u>) over dual vectors with 0 < f = 2 pi |xi| < below
/// at every node of a torus grid by one inverse real FFT.
class TorusSynthesizer {
 public:
  explicit TorusSynthesizer(const QuadratureRule& rule);
  ~TorusSynthesizer();
  TorusSynthesizer(const TorusSynthesizer&) = delete;
  TorusSynthesizer& operator=(const TorusSynthesizer&) = delete;

  std::vector<double> synthesize(double below, const std::function<double(double)>& coeff);
  /// Largest band the grid represents without aliasing.
  double max_frequency() const noexcept { return max_frequency_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  double max_frequency_ = 0.0;
};

/// N_{x,y}(lambda) at every node of the rule (zero mode excluded). Tori
/// use one inverse FFT per lambda; spheres reuse cached Legendre columns.
/// Euclidean space has no discrete spectrum and evaluates to zero.
class FieldEvaluator {
 public:
  FieldEvaluator(const QuadratureRule& rule, double lambda_max);
  ~FieldEvaluator();
  FieldEvaluator(const FieldEvaluator&) = delete;
  FieldEvaluator& operator=(const FieldEvaluator&) = delete;

  std::vector<double> values(double lambda);
  int dimension() const noexcept { return dimension_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int dimension_ = 0;
};

/// lambda^{(1-n)/2} N_euclid(lambda, d) per node, with d = 0 handled by the
/// Weyl term. Equal distances share one evaluation.
std::vector<double> euclidean_term(const QuadratureRule& rule, int n, double lambda);

struct Check {
  std::string name;
  double measured = 0.0;
  std::string op;  // "<=" or ">="
  double threshold = 0.0;
  bool pass = false;
};

/// Fit recorded with the grid keys it was computed from.
struct FitRecord {
  std::string name;
  std::string x_key;
  std::string y_key;
  std::string mode;  // "log-log", "lin-log" (y vs ln x) or "lin-log10"
  double x_min = 0.0;
  double x_max = 0.0;
  LinearFit fit;
};

struct ScanReport {
  std::string scan_id;
  std::map<std::string, std::vector<double>> grids;
  std::map<std::string, std::vector<double>> values;
  std::vector<FitRecord> fits;
  std::vector<Check> checks;
  std::map<std::string, std::string> metadata;

  bool passed() const;
  const Check* find_check(const std::string& name) const;
  const FitRecord* find_fit(const std::string& name) const;
};

Check make_check(std::string name, double measured, std::string op, double threshold);
/// Fit over x_key/y_key entries with x in [x_min, x_max].
FitRecord make_fit(const ScanReport& report, std::string name, std::string x_key, std::string y_key,
                   std::string mode, double x_min, double x_max);

/// Recomputes every fit from the stored grids and every pass flag from its
/// comparison; false if anything disagrees.
bool recheck(const ScanReport& report);

nlohmann::ordered_json to_json(const ScanReport& report);

struct ManifoldAverageOptions {
  double euclid_scale = 1.0;  // mutation hook for the comparison term
  double slope_tolerance = 0.15;
  double fit_min = 10.0;
  double fit_max = 1e300;
  const QuadratureRule* refined = nullptr;  // grid-refinement check at the top of the grid
  double refinement_tolerance = 0.005;
};

/// int_M |N~_{x,y}(lambda) - s lambda^{(1-n)/2} N_euclid(lambda, d_{x,y})|^2 dy.
ScanReport verify_manifold_average(std::span<const double> lambda_grid, const QuadratureRule& rule,
                                   const ManifoldAverageOptions& options = {});

/// One report per kappa: int_M d^kappa |N~|^2 dy, sharing each field evaluation.
std::vector<ScanReport> verify_weighted_average(std::span<const double> kappas, std::span<const double> lambda_grid,
                                                const QuadratureRule& rule, double fit_min = 50.0,
                                                double fit_max = 1e300);

struct ExceptionalSetResult {
  double lambda = 0.0;
  double mu = 0.0;
  double C = 0.0;
  double measure = 0.0;
  double scaled = 0.0;  // measure * C^2 mu^2
};

/// Measure of { y : |N~(lambda)| >= C (mu + d^{-(n+1)/2}) } for each mu.
std::vector<ExceptionalSetResult> exceptional_set_measure(const QuadratureRule& rule, double lambda,
                                                          std::span<const double> mus, double C);
ScanReport exceptional_set_scan(const QuadratureRule& rule, std::span<const double> lambdas,
                                std::span<const double> mus, double C);

/// Fraction of Vol(M) where max_{k <= K} |N~(tau_k)| / mu_k > t, for every
/// prefix K and every threshold t. values["fraction_t=<t>"] is indexed by K.
ScanReport sequence_corollary_check(const QuadratureRule& rule, std::span<const double> taus,
                                    std::span<const double> mus, std::span<const double> thresholds);

/// True when the pair satisfies the non-conjugacy condition on its model.
bool non_conjugate(const geometry::PointPair& pair);

struct LowerBoundOptions {
  double q = 0.0;
  double p = 1.0;
  double min_threshold = 0.05;
  double trend_tolerance = 0.01;  // slope vs log10 lambda >= -tol * mean
  double window_min = 0.0;        // defaults to the upper half of the grid
};

/// A(lambda) = lambda^{-q-1} int_0^lambda mu^q |N~(mu)|^p dmu on the grid,
/// integrated exactly between consecutive eigenvalues.
ScanReport verify_lower_bound(const spectra::SpectralSeries& series, std::span<const double> lambda_grid,
                              const LowerBoundOptions& options = {});
ScanReport verify_lower_bound(const geometry::PointPair& pair, std::span<const double> lambda_grid,
                              const LowerBoundOptions& options = {});

struct LogDivergenceOptions {
  double epsilon = 0.5;
  double fit_min = 1e2;
  double r2_threshold = 0.9;
};

/// I(lambda) = int_1^lambda |N~|^2 dmu / mu and
/// J(lambda) = int_e^lambda |N~|^2 (ln mu)^{-1-eps} dmu / mu on a log grid.
ScanReport log_divergence_check(const spectra::SpectralSeries& series, double lambda_max,
                                const LogDivergenceOptions& options = {});

}  // namespace sflab::harness
