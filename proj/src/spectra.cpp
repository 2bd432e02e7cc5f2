#include "sflab/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "sflab/error.hpp"
#include "sflab/numeric.hpp"
#include "sflab/specialfn.hpp"

namespace sflab::spectra {

namespace {

constexpr double merge_tolerance = 1e-9;
constexpr std::size_t band_points = std::size_t{1} << 22;

std::string format_vector(const geometry::Vector& v) {
  std::ostringstream os;
  os.precision(17);
  os << "(";
  for (int i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << ")";
  return os.str();
}

// Aggregates visited frequencies into shells with compensated sums.
class ShellBuilder {
 public:
  void add(double frequency, double coefficient) {
    if (open_ && frequency - start_ <= merge_tolerance * frequency) {
      sum_.add(coefficient);
      return;
    }
    flush();
    open_ = true;
    start_ = frequency;
    sum_ = CompensatedSum();
    sum_.add(coefficient);
  }
  std::vector<SpectralAtom> finish() {
    flush();
    return std::move(atoms_);
  }

 private:
  void flush() {
    if (open_) atoms_.push_back({start_, sum_.value()});
    open_ = false;
  }
  bool open_ = false;
  double start_ = 0.0;
  CompensatedSum sum_;
  std::vector<SpectralAtom> atoms_;
};

void require_cutoff(double cutoff) {
  if (!(cutoff > 0.0) || !std::isfinite(cutoff)) fail(ErrorKind::domain, "series cutoff must be positive");
}

}  // namespace

SpectralSeries::SpectralSeries(int dimension, std::vector<SpectralAtom> atoms, double cutoff,
                               bool include_zero_mode, DiagonalEnvelope envelope, std::string provenance)
    : dimension_(dimension),
      atoms_(std::move(atoms)),
      cutoff_(cutoff),
      include_zero_mode_(include_zero_mode),
      envelope_(envelope),
      provenance_(std::move(provenance)) {
  prefix_.resize(atoms_.size() + 1);
  CompensatedSum s;
  prefix_[0] = 0.0;
  for (std::size_t j = 0; j < atoms_.size(); ++j) {
    if (j && !(atoms_[j].frequency > atoms_[j - 1].frequency))
      fail(ErrorKind::domain, "series atoms must be strictly increasing in frequency");
    s.add(atoms_[j].coefficient);
    prefix_[j + 1] = s.value();
  }
}

std::size_t SpectralSeries::count_below(double lambda) const {
  const double edge = lambda - frequency_tie_tolerance * std::fabs(lambda);
  auto it = std::lower_bound(atoms_.begin(), atoms_.end(), edge,
                             [](const SpectralAtom& a, double l) { return a.frequency < l; });
  return static_cast<std::size_t>(it - atoms_.begin());
}

double SpectralSeries::partial_sum(std::size_t count) const {
  return prefix_.at(count);
}

SpectralSeries build_series_torus(const geometry::Lattice& lattice, const geometry::Vector& displacement,
                                  double cutoff, const SeriesOptions& options) {
  require_cutoff(cutoff);
  const int n = lattice.dimension();
  if (displacement.size() != n) fail(ErrorKind::domain, "displacement has the wrong dimension");
  const geometry::Lattice dual = lattice.dual();
  const double radius = cutoff / two_pi;
  const double estimate = geometry::estimated_ball_count(dual, radius);
  if (estimate > static_cast<double>(options.cap))
    fail(ErrorKind::capacity, "torus series up to frequency " + std::to_string(cutoff) + " needs about " +
                                  std::to_string(static_cast<long long>(estimate)) +
                                  " lattice points, above the cap of " + std::to_string(options.cap));

  // Phase 2 pi <x - y, xi> with xi = B^{-T} k equals 2 pi <B^{-1}(x - y), k>.
  geometry::Vector u = lattice.dual_basis().transpose() * displacement;
  for (int i = 0; i < n; ++i) u[i] -= std::floor(u[i]);
  const double inv_volume = 1.0 / lattice.volume();

  // Padded so rounding in the dual basis never drops a frequency equal to the cutoff.
  const double hi2_total = radius * radius * (1.0 + 1e-9);
  const auto bands = static_cast<std::size_t>(std::ceil(estimate / static_cast<double>(band_points)));
  ShellBuilder shells;
  struct Item {
    double norm2;
    double coefficient;
  };
  std::vector<Item> items;
  double lo2 = 0.0;
  for (std::size_t b = 1; b <= std::max<std::size_t>(bands, 1); ++b) {
    const bool last = b >= bands;
    const double hi2 = last ? hi2_total : hi2_total * std::pow(static_cast<double>(b) / bands, 2.0 / n);
    items.clear();
    geometry::for_each_lattice_point(
        dual.basis(), geometry::Vector::Zero(n), lo2, hi2, last,
        [&](std::span<const std::int64_t> k, double norm2) {
          bool zero = true;
          double phase = 0.0;
          for (int i = 0; i < n; ++i) {
            if (k[i] != 0) zero = false;
            double t = u[i] * static_cast<double>(k[i]);
            t -= std::nearbyint(t);
            phase += t;
          }
          if (zero && !options.include_zero_mode) return;
          phase -= std::nearbyint(phase);
          items.push_back({zero ? 0.0 : norm2, std::cos(two_pi * phase) * inv_volume});
        });
    std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& c) { return a.norm2 < c.norm2; });
    for (const auto& it : items) shells.add(two_pi * std::sqrt(it.norm2), it.coefficient);
    lo2 = hi2;
    if (last) break;
  }

  double diameter = 0.0;
  for (int j = 0; j < n; ++j) diameter += dual.basis().col(j).norm();
  DiagonalEnvelope env{geometry::unit_ball_volume(n) / std::pow(two_pi, n), two_pi * diameter};
  std::ostringstream prov;
  prov << "torus dim " << n << " vol " << lattice.volume() << " displacement " << format_vector(displacement);
  return SpectralSeries(n, shells.finish(), cutoff, options.include_zero_mode, env, prov.str());
}

SpectralSeries build_series_circle(double d, double cutoff, const SeriesOptions& options) {
  require_cutoff(cutoff);
  if (!std::isfinite(d)) fail(ErrorKind::domain, "circle displacement must be finite");
  std::vector<SpectralAtom> atoms;
  if (options.include_zero_mode) atoms.push_back({0.0, 1.0 / two_pi});
  const auto top = static_cast<long>(std::floor(cutoff));
  const long double dl = d;
  for (long m = 1; m <= top; ++m)
    atoms.push_back({static_cast<double>(m), static_cast<double>(std::cos(m * dl) / static_cast<long double>(pi))});
  DiagonalEnvelope env{1.0 / pi, options.include_zero_mode ? 0.5 : 0.0};
  std::ostringstream prov;
  prov.precision(17);
  prov << "circle d " << d;
  return SpectralSeries(1, std::move(atoms), cutoff, options.include_zero_mode, env, prov.str());
}

SpectralSeries build_series_sphere(int n, double s, double cutoff, const SeriesOptions& options) {
  require_cutoff(cutoff);
  if (n < 2) fail(ErrorKind::domain, "sphere dimension must be >= 2");
  if (!(s >= 0.0 && s <= pi)) fail(ErrorKind::domain, "sphere angle must lie in [0, pi]");
  const double t = s == 0.0 ? 1.0 : (s == pi ? -1.0 : std::cos(s));
  // Largest m with m(m+n-1) <= cutoff^2.
  auto m_max = static_cast<int>(std::floor(std::sqrt(cutoff * cutoff + 0.25 * (n - 1) * (n - 1)) - 0.5 * (n - 1)));
  while (m_max > 0 && std::sqrt(static_cast<double>(m_max) * (m_max + n - 1)) > cutoff) --m_max;
  while (std::sqrt((m_max + 1.0) * (m_max + n)) <= cutoff) ++m_max;
  const auto p = specialfn::legendre_muller_table(n, std::max(m_max, 1), t);
  const double dn = specialfn::sphere_area_constant(n);
  std::vector<SpectralAtom> atoms;
  if (options.include_zero_mode) atoms.push_back({0.0, 1.0 / dn});
  for (int m = 1; m <= m_max; ++m) {
    const double freq = std::sqrt(static_cast<double>(m) * (m + n - 1));
    atoms.push_back({freq, static_cast<double>(specialfn::multiplicity(n, m)) * p[m] / dn});
  }
  double factorial = 1.0;
  for (int k = 2; k <= n; ++k) factorial *= k;
  DiagonalEnvelope env{2.0 / (factorial * dn), static_cast<double>(n)};
  std::ostringstream prov;
  prov.precision(17);
  prov << "sphere dim " << n << " angle " << s;
  return SpectralSeries(n, std::move(atoms), cutoff, options.include_zero_mode, env, prov.str());
}

SpectralSeries build_series(const geometry::PointPair& pair, double cutoff, const SeriesOptions& options) {
  using namespace geometry;
  if (std::holds_alternative<Circle>(pair.manifold)) return build_series_circle(pair.displacement[0], cutoff, options);
  if (is_torus(pair.manifold)) return build_series_torus(torus_lattice(pair.manifold), pair.displacement, cutoff, options);
  if (const auto* s = std::get_if<Sphere>(&pair.manifold)) return build_series_sphere(s->n, pair.angle, cutoff, options);
  fail(ErrorKind::domain, "no eigenfunction series on " + describe(pair.manifold));
}

double evaluate_N(const SpectralSeries& series, double lambda) {
  if (!std::isfinite(lambda)) fail(ErrorKind::domain, "lambda must be finite");
  if (lambda > series.cutoff())
    fail(ErrorKind::cutoff, "lambda " + std::to_string(lambda) + " exceeds the series cutoff " +
                                std::to_string(series.cutoff()));
  if (lambda <= 0.0) return 0.0;
  return series.partial_sum(series.count_below(lambda));
}

RescaledValue evaluate_rescaled(const SpectralSeries& series, double lambda) {
  const double n = evaluate_N(series, lambda);
  if (lambda <= 0.0) return {lambda, 0.0};
  return {lambda, std::pow(lambda, 0.5 * (1 - series.dimension())) * n};
}

double spectral_function_circle(double d, double lambda) {
  if (!std::isfinite(d) || !std::isfinite(lambda)) fail(ErrorKind::domain, "arguments must be finite");
  const double r = std::fmod(d, two_pi);
  if (std::fabs(r) < 1e-12 || std::fabs(std::fabs(r) - two_pi) < 1e-12)
    fail(ErrorKind::conjugate, "circle points coincide (d is a multiple of 2 pi)");
  if (lambda <= 1.0) return 0.0;
  const long double c = std::ceil(static_cast<long double>(lambda));
  const long double dl = d;
  const long double value =
      -1.0L / (2 * static_cast<long double>(pi)) +
      std::sin((c - 0.5L) * dl) / (2 * static_cast<long double>(pi) * std::sin(dl / 2));
  return static_cast<double>(value);
}

double euclidean_N(int n, double d, double lambda) {
  if (n < 1) fail(ErrorKind::domain, "dimension must be >= 1");
  if (!(d > 0.0)) fail(ErrorKind::domain, "euclidean_N needs d > 0 (use the Weyl term on the diagonal)");
  if (!(lambda >= 0.0)) fail(ErrorKind::domain, "lambda must be nonnegative");
  if (lambda == 0.0) return 0.0;
  const double half = 0.5 * n;
  return std::pow(two_pi, -half) * std::pow(lambda / d, half) * specialfn::bessel_j(half, d * lambda);
}

double euclidean_N_regular(int n, double d, double lambda) {
  if (d == 0.0) return weyl_leading(n, lambda);
  return euclidean_N(n, d, lambda);
}

double euclidean_N_asymptotic(int n, double d, double lambda) {
  if (n < 1) fail(ErrorKind::domain, "dimension must be >= 1");
  if (!(d > 0.0) || !(lambda >= 0.0)) fail(ErrorKind::domain, "need d > 0 and lambda >= 0");
  if (d * lambda < 1.0) fail(ErrorKind::regime, "asymptotic Euclidean term needs d * lambda >= 1");
  return 2.0 * std::pow(lambda, 0.5 * (n - 1)) / std::pow(two_pi * d, 0.5 * (n + 1)) *
         std::sin(lambda * d - 0.25 * (n - 1) * pi);
}

double weyl_leading(int n, double lambda) {
  if (n < 1) fail(ErrorKind::domain, "dimension must be >= 1");
  if (!(lambda >= 0.0)) fail(ErrorKind::domain, "lambda must be nonnegative");
  return std::pow(lambda, n) / (std::pow(4 * pi, 0.5 * n) * std::tgamma(0.5 * n + 1));
}

double sphere_darboux_main(int n, double s, int m) {
  if (n < 2) fail(ErrorKind::domain, "sphere dimension must be >= 2");
  if (!(s > 0.0 && s < pi)) fail(ErrorKind::conjugate, "Darboux main term needs 0 < s < pi");
  return 2.0 * std::cos(0.5 * s) * std::pow(static_cast<double>(m), 0.5 * (n - 1)) /
         std::pow(two_pi * std::sin(s), 0.5 * (n + 1)) * std::cos((0.5 * n + m) * s - 0.25 * (n + 1) * pi);
}

void write_series(std::ostream& out, const SpectralSeries& series) {
  out << "# " << series.provenance() << "\n";
  out << "# dimension " << series.dimension() << ", cutoff ";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", series.cutoff());
  out << buf << ", zero mode " << (series.include_zero_mode() ? "included" : "excluded") << "\n";
  out << "frequency,coefficient\n";
  for (const auto& a : series.atoms()) {
    std::snprintf(buf, sizeof buf, "%.17g,", a.frequency);
    out << buf;
    std::snprintf(buf, sizeof buf, "%.17g\n", a.coefficient);
    out << buf;
  }
}

}  // namespace sflab::spectra
