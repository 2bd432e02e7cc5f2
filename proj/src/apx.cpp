#include "sflab/apx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sflab/error.hpp"
#include "sflab/numeric.hpp"

namespace sflab::apx {

namespace {

void sort_terms(ApExpansion& e) {
  std::stable_sort(e.terms.begin(), e.terms.end(),
                   [](const TrigTerm& a, const TrigTerm& b) { return a.frequency < b.frequency; });
}

double target_weight(double mu, double power) {
  if (power == 0.0) return 1.0;
  if (power == -0.5) return 1.0 / std::sqrt(mu);
  return std::pow(mu, power);
}

// Adds int_a^b (mu^power level - e(mu))^2 to `acc`.
void integrate_gap(double a, double b, double level, double power, const ApExpansion& e, double theta,
                   CompensatedSum& acc) {
  const double length = b - a;
  if (!(length > 0.0)) return;
  auto eta = [&](double h, double lo) { return theta * h + (power != 0.0 ? 2.0 * h / lo : 0.0); };
  const auto pieces = static_cast<std::size_t>(std::max(1.0, std::ceil(eta(length, a) / 0.8)));
  const double h = length / static_cast<double>(pieces);
  for (std::size_t i = 0; i < pieces; ++i) {
    const double lo = a + h * static_cast<double>(i);
    const double g = eta(h, lo);
    const GaussRule& rule = gauss_legendre(g < 0.02 ? 2 : (g < 0.2 ? 3 : 5));
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      const double mu = lo + 0.5 * h * (1.0 + rule.nodes[q]);
      const double r = target_weight(mu, power) * level - eval_expansion(e, mu);
      acc.add(0.5 * h * rule.weights[q] * r * r);
    }
  }
}

double circle_level(CircleKernel kind, double s, double j) {
  const double denom = 2.0 * std::sin(0.5 * s);
  switch (kind) {
    case CircleKernel::sin_floor: return std::sin((j + 0.5) * s) / denom;
    case CircleKernel::sin_round: return std::sin(j * s) / denom;
    case CircleKernel::cos_floor: return std::cos((j + 0.5) * s) / denom;
    case CircleKernel::cos_round: return std::cos(j * s) / denom;
  }
  return 0.0;
}

}  // namespace

ApExpansion expansion_from_geodesics(std::span<const geometry::GeodesicSegment> segments, int n, double Q) {
  if (n < 1) fail(ErrorKind::domain, "dimension must be >= 1");
  ApExpansion e;
  e.cutoff = Q;
  const double scale = 2.0 / std::pow(two_pi, 0.5 * (n + 1));
  for (const auto& seg : segments) {
    if (!(seg.jacobi_det() > 0.0)) fail(ErrorKind::conjugate, "segment with vanishing Jacobi determinant");
    if (seg.length() > Q) continue;
    e.terms.push_back({scale / (seg.length() * std::sqrt(seg.jacobi_det())), seg.length(),
                       -0.25 * (n - 1) * pi - 0.5 * seg.morse_index() * pi});
  }
  sort_terms(e);
  return e;
}

ApExpansion torus_expansion(const geometry::Lattice& lattice, const geometry::Vector& displacement, double Q) {
  const auto segs = geometry::geodesics_torus(lattice, displacement, Q);
  ApExpansion e = expansion_from_geodesics(segs, lattice.dimension(), Q);
  std::ostringstream os;
  os << "torus dim " << lattice.dimension() << " Q " << Q << " terms " << e.terms.size();
  e.provenance = os.str();
  return e;
}

ApExpansion sphere_expansion(int n, double s, int K) {
  const auto segs = geometry::geodesics_sphere(n, s, K);
  ApExpansion e = expansion_from_geodesics(segs, n, std::numeric_limits<double>::infinity());
  e.cutoff = e.max_frequency();
  std::ostringstream os;
  os << "sphere dim " << n << " K " << K;
  e.provenance = os.str();
  return e;
}

ApExpansion circle_expansion(double d, double Q, bool with_constant) {
  const auto lattice = geometry::torus_lattice(geometry::Circle{});
  geometry::Vector disp(1);
  disp << d;
  ApExpansion e = expansion_from_geodesics(geometry::geodesics_torus(lattice, disp, Q), 1, Q);
  if (with_constant) e.constant = -1.0 / two_pi;
  std::ostringstream os;
  os << "circle Q " << Q;
  e.provenance = os.str();
  return e;
}

ApExpansion expansion_for_pair(const geometry::PointPair& pair, double Q) {
  using namespace geometry;
  if (std::holds_alternative<Circle>(pair.manifold)) return circle_expansion(pair.displacement[0], Q, true);
  if (is_torus(pair.manifold)) return torus_expansion(torus_lattice(pair.manifold), pair.displacement, Q);
  if (const auto* s = std::get_if<Sphere>(&pair.manifold)) {
    const auto segs = geodesics_sphere(s->n, pair.angle, static_cast<int>(std::ceil(Q / two_pi)) + 1);
    ApExpansion e = expansion_from_geodesics(segs, s->n, Q);
    e.provenance = "sphere Q " + std::to_string(Q);
    return e;
  }
  fail(ErrorKind::domain, "no geodesic expansion on " + describe(pair.manifold));
}

double eval_expansion(const ApExpansion& e, double lambda) {
  CompensatedSum s;
  s.add(e.constant);
  for (const auto& t : e.terms) s.add(t.amplitude * std::sin(t.frequency * lambda + t.phase));
  return s.value();
}

double morse_phase_check(int n, long k) {
  const long omega = static_cast<long>(n - 1) * (2 * std::labs(k) - geometry::reversed_heaviside(k));
  return -static_cast<double>(n - 1 + 2 * omega) * pi / 4.0;
}

SeminormEstimate besicovitch_seminorm(const std::function<double(double)>& f, double p, double T,
                                      double samples_per_unit, double max_frequency) {
  if (!(p >= 1.0)) fail(ErrorKind::domain, "seminorm exponent must be >= 1");
  if (!(T > 0.0) || !std::isfinite(T)) fail(ErrorKind::domain, "horizon must be positive");
  if (!(samples_per_unit > 0.0)) fail(ErrorKind::domain, "sampling density must be positive");
  if (max_frequency > 0.0 && samples_per_unit < 8.0 * max_frequency / two_pi)
    fail(ErrorKind::resolution, "sampling density " + std::to_string(samples_per_unit) +
                                    " per unit is below the required " +
                                    std::to_string(8.0 * max_frequency / two_pi));
  const auto quarter = static_cast<std::size_t>(std::ceil(T * samples_per_unit / 4.0));
  const std::size_t cells = 4 * std::max<std::size_t>(quarter, 1);
  const double h = T / static_cast<double>(cells);
  SeminormEstimate out;
  out.p = p;
  out.T = T;
  out.samples_per_unit = static_cast<double>(cells) / T;
  CompensatedSum acc;
  for (std::size_t i = 0; i < cells; ++i) {
    const double x = h * (static_cast<double>(i) + 0.5);
    const double v = f(x);
    if (!std::isfinite(v)) fail(ErrorKind::non_finite, "non-finite sample at lambda = " + std::to_string(x));
    acc.add(h * (p == 1.0 ? std::fabs(v) : (p == 2.0 ? v * v : std::pow(std::fabs(v), p))));
    if (i + 1 == cells / 4 || i + 1 == cells / 2 || i + 1 == cells) {
      const double horizon = h * static_cast<double>(i + 1);
      out.history_T.push_back(horizon);
      out.history.push_back(std::pow(acc.value() / horizon, 1.0 / p));
    }
  }
  out.value = out.history.back();
  return out;
}

PiecewiseTarget rescaled_target(const spectra::SpectralSeries& series) {
  PiecewiseTarget t;
  t.power = 0.5 * (1 - series.dimension());
  const auto& atoms = series.atoms();
  t.breaks.reserve(atoms.size());
  t.values.reserve(atoms.size() + 1);
  for (const auto& a : atoms) t.breaks.push_back(a.frequency);
  for (std::size_t j = 0; j <= atoms.size(); ++j) t.values.push_back(series.partial_sum(j));
  return t;
}

std::vector<double> residual_history(const PiecewiseTarget& target, const ApExpansion& e,
                                     std::span<const double> horizons, double lower) {
  if (target.values.size() != target.breaks.size() + 1)
    fail(ErrorKind::domain, "piecewise target needs one more value than breakpoints");
  if (!(lower > 0.0) && target.power < 0.0) fail(ErrorKind::domain, "singular weight needs a positive lower limit");
  for (std::size_t i = 0; i < horizons.size(); ++i)
    if (!(horizons[i] > lower) || (i && !(horizons[i] > horizons[i - 1])))
      fail(ErrorKind::domain, "horizons must be increasing and above the lower limit");
  const double theta = e.max_frequency();
  std::vector<double> out;
  CompensatedSum acc;
  std::size_t j = static_cast<std::size_t>(
      std::upper_bound(target.breaks.begin(), target.breaks.end(), lower) - target.breaks.begin());
  double pos = lower;
  std::size_t next = 0;
  while (next < horizons.size()) {
    const double gap_end = j < target.breaks.size() ? target.breaks[j] : std::numeric_limits<double>::infinity();
    const double end = std::min(gap_end, horizons[next]);
    integrate_gap(pos, end, target.values[j], target.power, e, theta, acc);
    pos = end;
    if (end == horizons[next]) {
      out.push_back(acc.value() / horizons[next]);
      ++next;
    }
    if (end == gap_end) ++j;
  }
  return out;
}

std::vector<double> b2_residual_history(const spectra::SpectralSeries& series, const ApExpansion& e,
                                        std::span<const double> horizons) {
  for (double T : horizons)
    if (T > series.cutoff())
      fail(ErrorKind::cutoff, "horizon " + std::to_string(T) + " exceeds the series cutoff " +
                                  std::to_string(series.cutoff()));
  return residual_history(rescaled_target(series), e, horizons, 1.0);
}

double b2_residual(const spectra::SpectralSeries& series, const ApExpansion& e, double T) {
  const double h[] = {T};
  return b2_residual_history(series, e, h).front();
}

PiecewiseTarget circle_kernel_target(CircleKernel kind, double s, double T) {
  if (!(s > 0.0 && s < pi)) fail(ErrorKind::domain, "circle kernel needs 0 < s < pi");
  const bool rounded = kind == CircleKernel::sin_round || kind == CircleKernel::cos_round;
  PiecewiseTarget t;
  // Level index j counts breakpoints below lambda; the floors change at
  // integers (floor) or half-integers (round).
  const double shift = rounded ? 0.5 : 1.0;
  for (double b = shift; b <= T + 1.0; b += 1.0) t.breaks.push_back(b);
  for (std::size_t j = 0; j <= t.breaks.size(); ++j) t.values.push_back(circle_level(kind, s, static_cast<double>(j)));
  return t;
}

ApExpansion circle_kernel_expansion(CircleKernel kind, double s, int K) {
  ApExpansion e;
  for (long k = -K; k <= K; ++k) {
    const double l = std::fabs(s + two_pi * static_cast<double>(k));
    const int h = geometry::reversed_heaviside(k);
    double sign = 1.0, phase = 0.0;
    switch (kind) {
      case CircleKernel::sin_floor: break;
      case CircleKernel::sin_round: sign = (k % 2 == 0) ? 1.0 : -1.0; break;
      case CircleKernel::cos_floor:
        sign = h ? -1.0 : 1.0;
        phase = 0.5 * pi;
        break;
      case CircleKernel::cos_round:
        sign = ((std::labs(k) + h) % 2 == 0) ? 1.0 : -1.0;
        phase = 0.5 * pi;
        break;
    }
    e.terms.push_back({sign / l, l, phase});
  }
  sort_terms(e);
  e.cutoff = e.max_frequency();
  return e;
}

double inverse_sin2_partial(double s, long K) {
  CompensatedSum acc;
  for (long k = -K; k <= K; ++k) {
    const double v = s + two_pi * static_cast<double>(k);
    acc.add(4.0 / (v * v));
  }
  return acc.value();
}

}  // namespace sflab::apx
