#include "sflab/zeta.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sflab/error.hpp"
#include "sflab/specialfn.hpp"

namespace sflab::zeta {

namespace {

using lcomplex = std::complex<long double>;

std::string format_number(double x) {
  std::ostringstream out;
  out.precision(6);
  out << x;
  return out.str();
}

// m^{-z} in extended precision.
lcomplex power_minus(long double m, complex z) {
  const long double lg = std::log(m);
  const long double mag = std::exp(-static_cast<long double>(z.real()) * lg);
  const long double ph = -static_cast<long double>(z.imag()) * lg;
  return {mag * std::cos(ph), mag * std::sin(ph)};
}

double envelope_tail(double A, double rho, int n, double t, double Lambda) {
  return t * A * std::pow(1.0 + rho / Lambda, n) * std::pow(Lambda, n - t) / (t - n);
}

double bracket(double s) { return std::sqrt(1.0 + s * s); }

}  // namespace

double direct_tail_bound(const spectra::SpectralSeries& series, double t, double Lambda) {
  const int n = series.dimension();
  if (!(t > n)) fail(ErrorKind::regime, "direct tail bound needs Re z > n");
  if (!(Lambda > 0.0)) fail(ErrorKind::domain, "tail bound needs a positive cutoff");
  const auto& env = series.envelope();
  return envelope_tail(env.scale, env.shift, n, t, Lambda);
}

ZetaPoint zeta_direct(const spectra::SpectralSeries& series, complex z, double tol, double margin) {
  const int n = series.dimension();
  const double t = z.real();
  if (!(t > n + margin))
    fail(ErrorKind::regime, "direct zeta sum needs Re z > " + format_number(n + margin) +
                                "; use zeta_accelerated_circle for the conditionally convergent range");
  if (!(tol > 0.0)) fail(ErrorKind::domain, "tolerance must be positive");
  const double Lambda = series.cutoff();
  const double tail = direct_tail_bound(series, t, Lambda);
  if (tail > tol) {
    // Smallest cutoff meeting tol, for the message.
    double need = Lambda;
    while (direct_tail_bound(series, t, need) > tol) need *= 1.25;
    fail(ErrorKind::cutoff, "zeta tolerance " + format_number(tol) + " at Re z = " + format_number(t) +
                                " needs a series cutoff near " + format_number(need) + ", have " +
                                format_number(series.cutoff()));
  }
  return zeta_partial(series, z, Lambda);
}

ZetaPoint zeta_partial(const spectra::SpectralSeries& series, complex z, double Lambda) {
  const double t = z.real();
  if (Lambda > series.cutoff()) fail(ErrorKind::cutoff, "partial zeta sum beyond the series cutoff");
  const auto& atoms = series.atoms();
  CompensatedComplexSum acc;
  double magnitude = 0.0, rounding = 0.0;
  const std::size_t count = series.count_below(Lambda);
  for (std::size_t j = 0; j < count; ++j) {
    const auto& a = atoms[j];
    const lcomplex p = power_minus(a.frequency, z);
    const complex term(static_cast<double>(p.real()) * a.coefficient, static_cast<double>(p.imag()) * a.coefficient);
    acc.add(term);
    const double size = std::abs(a.coefficient) * std::pow(a.frequency, -t);
    magnitude += size;
    rounding += size * (1.0 + std::abs(z) * std::fabs(std::log(a.frequency))) * 1e-18;
  }
  ZetaPoint out;
  out.t = t;
  out.s = z.imag();
  out.value = acc.value();
  out.tail_bound = direct_tail_bound(series, t, Lambda) + rounding +
                   4.0 * std::numeric_limits<double>::epsilon() * magnitude;
  out.cutoff = Lambda;
  out.method = "direct";
  return out;
}

ZetaPoint zeta_accelerated_circle(double d, complex z, double tol) {
  const double t = z.real();
  if (!(t > 0.0)) fail(ErrorKind::regime, "accelerated circle zeta needs Re z > 0");
  if (!(tol > 0.0)) fail(ErrorKind::domain, "tolerance must be positive");
  const long double half = std::sin(0.5L * static_cast<long double>(d));
  if (std::fabs(half) < 1e-12L)
    fail(ErrorKind::regime, "circle zeta diverges at d in 2 pi Z (the conjugate diagonal)");
  const lcomplex w = std::polar(1.0L, static_cast<long double>(d));
  const lcomplex c = w / (1.0L - w);
  const double abs_c = static_cast<double>(std::abs(c));
  const double abs_z = std::abs(z);

  constexpr int max_order = 16;
  auto remainder = [&](double M, int p) {
    double poch = 1.0;
    for (int i = 0; i < p; ++i) poch *= std::abs(z + static_cast<double>(i));
    return std::pow(abs_c, p) * poch * std::pow(M, 1.0 - t - p) / (t + p - 1.0) / pi;
  };
  double M = std::max(64.0, std::ceil(2.0 * abs_c * (abs_z + max_order)));
  int order = 0;
  for (;; M *= 2.0) {
    if (M > double(1 << 26)) fail(ErrorKind::cutoff, "accelerated circle zeta could not reach the tolerance");
    for (int p = 1; p <= max_order; ++p)
      if (remainder(M, p) <= 0.5 * tol) {
        order = p;
        break;
      }
    if (order) break;
  }
  const auto Mi = static_cast<long>(M);

  lcomplex head = 0.0L;
  long double magnitude = 0.0L;
  for (long m = 1; m <= Mi; ++m) {
    const lcomplex p = power_minus(static_cast<long double>(m), z);
    head += std::cos(static_cast<long double>(m) * static_cast<long double>(d)) * p;
    magnitude += std::abs(p);
  }
  // Forward differences of g(k) = (M + 1 + k)^{-z}.
  std::vector<lcomplex> diff(order);
  for (int k = 0; k < order; ++k) diff[k] = power_minus(static_cast<long double>(Mi + 1 + k), z);
  std::vector<lcomplex> delta0(order);
  for (int j = 0; j < order; ++j) {
    delta0[j] = diff[0];
    for (int k = 0; k + 1 < order - j; ++k) diff[k] = diff[k + 1] - diff[k];
  }
  const long double phase = static_cast<long double>(Mi + 1) * static_cast<long double>(d);
  auto tail = [&](lcomplex ww, long double sign) {
    const lcomplex cc = ww / (1.0L - ww);
    lcomplex sum = 0.0L, cp = 1.0L;
    for (int j = 0; j < order; ++j) {
      sum += cp * delta0[j];
      cp *= cc;
    }
    return std::polar(1.0L, sign * phase) * sum / (1.0L - ww);
  };
  const lcomplex total = (head + 0.5L * (tail(w, 1.0L) + tail(std::conj(w), -1.0L))) / static_cast<long double>(pi);

  ZetaPoint out;
  out.t = t;
  out.s = z.imag();
  out.value = complex(static_cast<double>(total.real()), static_cast<double>(total.imag()));
  const double rounding = static_cast<double>(magnitude) / pi *
                          (4e-16 + 1e-19 * M * (1.0 + abs_z * std::log(M)));
  out.tail_bound = remainder(M, order) + rounding;
  out.cutoff = M;
  out.method = "accelerated_circle_p" + std::to_string(order);
  return out;
}

double predicted_growth_exponent(int n, double t, bool& has_prediction) {
  has_prediction = false;
  const double tiny = 1e-12;
  if (std::fabs(t - n) < tiny || std::fabs(t - 0.5 * n) < tiny) return std::nan("");
  if (t > n) {
    has_prediction = true;
    return 0.0;
  }
  if (t > 0.5 * n) {
    has_prediction = true;
    return n - t;
  }
  return std::nan("");
}

namespace {

ZetaScan finish_scan(ZetaScan scan, int n) {
  scan.predicted_exponent = predicted_growth_exponent(n, scan.t, scan.checked);
  const auto report = to_report(scan, "zeta_growth");
  if (const auto* f = report.find_fit("growth")) scan.fit = f->fit;
  return scan;
}

}  // namespace

ZetaScan zeta_growth_scan(const spectra::SpectralSeries& series, double t, std::span<const double> s_grid,
                          double tol) {
  ZetaScan scan;
  scan.t = t;
  scan.s_grid.assign(s_grid.begin(), s_grid.end());
  scan.values.resize(s_grid.size());
  parallel_for(s_grid.size(), [&](std::size_t i) { scan.values[i] = zeta_direct(series, {t, s_grid[i]}, tol); });
  return finish_scan(std::move(scan), series.dimension());
}

ZetaScan zeta_growth_scan_circle(double d, double t, std::span<const double> s_grid, double tol) {
  ZetaScan scan;
  scan.t = t;
  scan.s_grid.assign(s_grid.begin(), s_grid.end());
  scan.values.resize(s_grid.size());
  parallel_for(s_grid.size(),
               [&](std::size_t i) { scan.values[i] = zeta_accelerated_circle(d, {t, s_grid[i]}, tol); });
  return finish_scan(std::move(scan), 1);
}

harness::ScanReport to_report(const ZetaScan& scan, const std::string& scan_id) {
  harness::ScanReport r;
  r.scan_id = scan_id;
  r.metadata["t"] = format_number(scan.t);
  if (!scan.values.empty()) r.metadata["method"] = scan.values.front().method;
  std::vector<double> br, re, im, ab, tb;
  for (std::size_t i = 0; i < scan.s_grid.size(); ++i) {
    br.push_back(bracket(scan.s_grid[i]));
    re.push_back(scan.values[i].value.real());
    im.push_back(scan.values[i].value.imag());
    ab.push_back(std::abs(scan.values[i].value));
    tb.push_back(scan.values[i].tail_bound);
  }
  r.grids["s"] = scan.s_grid;
  r.grids["bracket_s"] = br;
  r.values["re"] = re;
  r.values["im"] = im;
  r.values["abs"] = ab;
  r.values["tail_bound"] = tb;

  double asym = 0.0;
  bool symmetric = false;
  for (std::size_t i = 0; i < scan.s_grid.size(); ++i)
    for (std::size_t j = 0; j < scan.s_grid.size(); ++j)
      if (scan.s_grid[j] == -scan.s_grid[i] && scan.s_grid[i] > 0.0) {
        symmetric = true;
        asym = std::max(asym, std::abs(scan.values[j].value - std::conj(scan.values[i].value)));
      }
  if (symmetric) r.checks.push_back(harness::make_check("conjugate_symmetry", asym, "<=", 1e-10));
  for (std::size_t i = 0; i < scan.s_grid.size(); ++i)
    if (scan.s_grid[i] == 0.0)
      r.checks.push_back(harness::make_check("real_at_zero", std::fabs(scan.values[i].value.imag()), "<=", 1e-10));

  double s_max = 0.0;
  std::size_t in_range = 0;
  for (double s : scan.s_grid) {
    s_max = std::max(s_max, std::fabs(s));
    if (std::fabs(s) >= scan.s_min) ++in_range;
  }
  if (in_range >= 2 && s_max > scan.s_min) {
    r.fits.push_back(
        harness::make_fit(r, "growth", "bracket_s", "abs", "log-log", bracket(scan.s_min), bracket(s_max)));
    if (scan.checked)
      r.checks.push_back(harness::make_check("growth_exponent", r.fits.back().fit.slope, "<=",
                                             scan.predicted_exponent + scan.tolerance));
    else
      r.metadata["growth_exponent"] = "reported without a prediction";
  }
  return r;
}

MellinResult mellin_consistency(const spectra::SpectralSeries& series, complex z, double lambda_cap, double tol) {
  if (lambda_cap > series.cutoff()) fail(ErrorKind::cutoff, "lambda_cap exceeds the series cutoff");
  if (!(lambda_cap > 0.0)) fail(ErrorKind::domain, "lambda_cap must be positive");
  MellinResult out;
  const auto direct = zeta_direct(series, z, tol);
  out.direct = direct.value;
  const auto& atoms = series.atoms();
  CompensatedComplexSum acc;
  auto pw = [&](double x) {
    const lcomplex p = power_minus(x, z);
    return complex(static_cast<double>(p.real()), static_cast<double>(p.imag()));
  };
  // On (lambda_j, lambda_{j+1}] the counting function equals partial_sum(j + 1).
  const std::size_t count = series.count_below(lambda_cap);
  for (std::size_t j = 0; j < count; ++j) {
    const double a = atoms[j].frequency;
    const double b = j + 1 < count ? atoms[j + 1].frequency : lambda_cap;
    acc.add(series.partial_sum(j + 1) * (pw(a) - pw(b)));
  }
  acc.add(series.partial_sum(count) * pw(lambda_cap));
  out.mellin = acc.value();
  out.residual = std::abs(out.direct - out.mellin);
  out.bound = direct.tail_bound + direct_tail_bound(series, z.real(), lambda_cap) +
              1e-14 * (1.0 + std::abs(out.direct));
  return out;
}

harness::ScanReport zeta_manifold_average(const harness::QuadratureRule& rule, double t,
                                          std::span<const double> s_grid, double eps, double sphere_cutoff) {
  using harness::QuadratureRule;
  const int n = geometry::dimension(rule.manifold);
  if (!(t > n)) fail(ErrorKind::regime, "zeta manifold average needs Re z > n");
  if (!(eps > 0.0)) fail(ErrorKind::domain, "epsilon must be positive");
  if (s_grid.empty()) fail(ErrorKind::config, "empty s grid");
  std::vector<double> weight(rule.size());
  for (std::size_t i = 0; i < rule.size(); ++i)
    weight[i] = rule.weights[i] / (std::pow(rule.distance[i], 2.0 * t - n - eps) + 1.0);

  std::vector<double> integral(s_grid.size());
  double A = 0.0, rho = 0.0, Lambda = 0.0;
  if (rule.kind == QuadratureRule::Kind::torus_grid) {
    const auto lat = geometry::torus_lattice(rule.manifold);
    harness::TorusSynthesizer synth(rule);
    Lambda = synth.max_frequency();
    const double inv_vol = 1.0 / lat.volume();
    for (int c = 0; c < lat.dimension(); ++c) rho += lat.dual_basis().col(c).norm();
    rho *= two_pi;
    A = geometry::unit_ball_volume(n) / std::pow(two_pi, n);
    for (std::size_t k = 0; k < s_grid.size(); ++k) {
      const complex z(t, s_grid[k]);
      const auto re = synth.synthesize(Lambda, [&](double f) { return std::real(std::pow(f, -z)) * inv_vol; });
      const auto im = synth.synthesize(Lambda, [&](double f) { return std::imag(std::pow(f, -z)) * inv_vol; });
      std::vector<double> f(rule.size());
      for (std::size_t i = 0; i < f.size(); ++i) f[i] = weight[i] * (re[i] * re[i] + im[i] * im[i]);
      integral[k] = pairwise_sum(f);
    }
  } else if (rule.kind == QuadratureRule::Kind::sphere_gauss) {
    int m_max = 0;
    while (std::sqrt((m_max + 1.0) * (m_max + 1.0 + n - 1)) < sphere_cutoff) ++m_max;
    Lambda = sphere_cutoff;
    const double dn = specialfn::sphere_area_constant(n);
    A = 2.0 / (std::tgamma(n + 1.0) * dn);
    rho = n;
    const std::size_t stride = static_cast<std::size_t>(m_max);
    std::vector<double> coeff(rule.size() * stride);
    std::vector<double> freq(stride);
    for (int m = 1; m <= m_max; ++m) freq[m - 1] = std::sqrt(static_cast<double>(m) * (m + n - 1));
    parallel_for(rule.size(), [&](std::size_t i) {
      const auto p = specialfn::legendre_muller_table(n, m_max, std::cos(rule.angle[i]));
      for (int m = 1; m <= m_max; ++m)
        coeff[i * stride + m - 1] = static_cast<double>(specialfn::multiplicity(n, m)) * p[m] / dn;
    });
    for (std::size_t k = 0; k < s_grid.size(); ++k) {
      const complex z(t, s_grid[k]);
      std::vector<complex> pw(stride);
      for (std::size_t m = 0; m < stride; ++m) pw[m] = std::pow(freq[m], -z);
      std::vector<double> f(rule.size());
      parallel_for(rule.size(), [&](std::size_t i) {
        CompensatedComplexSum acc;
        for (std::size_t m = 0; m < stride; ++m) acc.add(coeff[i * stride + m] * pw[m]);
        f[i] = weight[i] * std::norm(acc.value());
      });
      integral[k] = pairwise_sum(f);
    }
  } else {
    fail(ErrorKind::domain, "zeta manifold average needs a torus grid or a sphere rule");
  }

  harness::ScanReport r;
  r.scan_id = "zeta_manifold_average";
  r.metadata["manifold"] = geometry::describe(rule.manifold);
  r.metadata["t"] = format_number(t);
  r.metadata["epsilon"] = format_number(eps);
  r.metadata["frequency_cutoff"] = format_number(Lambda);
  std::vector<double> s(s_grid.begin(), s_grid.end()), br;
  for (double v : s) br.push_back(bracket(v));
  r.grids["s"] = s;
  r.grids["bracket_s"] = br;
  r.values["integral"] = integral;
  // ||tail||_{L^2(dy)}^2 = sum_{f >= Lambda} f^{-2t} (diagonal coefficient).
  r.values["l2_tail_bound"] = {std::sqrt(envelope_tail(A, rho, n, 2.0 * t, Lambda))};
  double top = 0.0, at_zero = std::nan("");
  for (std::size_t k = 0; k < s.size(); ++k) {
    top = std::max(top, integral[k]);
    if (s[k] == 0.0) at_zero = integral[k];
  }
  if (!std::isnan(at_zero)) r.metadata["zero_over_max"] = format_number(at_zero / top);
  double s_max = 0.0;
  for (double v : s) s_max = std::max(s_max, std::fabs(v));
  if (s_max > 10.0) {
    r.fits.push_back(harness::make_fit(r, "growth", "bracket_s", "integral", "log-log", bracket(10.0), bracket(s_max)));
    r.checks.push_back(harness::make_check("growth_exponent", r.fits.back().fit.slope, "<=", 0.1));
  }
  return r;
}

}  // namespace sflab::zeta
