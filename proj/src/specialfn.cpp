#include "sflab/specialfn.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "sflab/error.hpp"
#include "sflab/numeric.hpp"

namespace sflab::specialfn {

namespace {

using real = long double;

constexpr real pi_l = 3.141592653589793238462643383279502884L;
constexpr double series_limit = 20.0;

bool is_half_integer(double alpha) {
  const double twice = 2.0 * alpha;
  return twice == std::floor(twice) && std::fmod(twice, 2.0) == 1.0;
}

// Ascending series sum_k (-1)^k (x/2)^{2k+alpha} / (k! Gamma(k+alpha+1)).
double bessel_series(double alpha, double x) {
  const real h = static_cast<real>(x) / 2;
  real term = std::exp(static_cast<real>(alpha) * std::log(h) - std::lgamma(static_cast<real>(alpha) + 1));
  real sum = term;
  const real h2 = h * h;
  for (int k = 1; k < 500; ++k) {
    term *= -h2 / (static_cast<real>(k) * (k + static_cast<real>(alpha)));
    sum += term;
    if (k > h && std::fabs(term) <= 1e-21L * std::fabs(sum) + 1e-300L) break;
  }
  return static_cast<double>(sum);
}

// Spherical Bessel upward recurrence, valid for x >= alpha.
double bessel_half_integer(double alpha, double x) {
  const int l = static_cast<int>(alpha - 0.5);
  const real xl = x;
  const real s = std::sin(xl), c = std::cos(xl);
  real j0 = s / xl;
  real j1 = s / (xl * xl) - c / xl;
  if (l == 0) return static_cast<double>(std::sqrt(2 * xl / pi_l) * j0);
  for (int k = 1; k < l; ++k) {
    const real j2 = (2 * k + 1) / xl * j1 - j0;
    j0 = j1;
    j1 = j2;
  }
  return static_cast<double>(std::sqrt(2 * xl / pi_l) * j1);
}

// Hankel large-argument expansion. Empty when the terms never get small
// enough or grow large enough to lose digits to cancellation.
std::optional<double> bessel_hankel(double nu, double x) {
  const real mu = 4 * static_cast<real>(nu) * nu;
  const real ex = 8 * static_cast<real>(x);
  real term = 1, p = 1, q = 0, largest = 1, previous = 1;
  bool converged = false;
  for (int k = 1; k < 400; ++k) {
    const real odd = 2 * k - 1;
    term *= (mu - odd * odd) / (k * ex);
    const real mag = std::fabs(term);
    largest = std::max(largest, mag);
    if (largest > 1e3L) return std::nullopt;
    if (term == 0 || mag < 1e-18L) {
      converged = true;
      break;
    }
    // Terms growing again past the turning point: the expansion diverges.
    if (odd * odd > mu && mag > previous) break;
    previous = mag;
    const int r = k % 4;
    if (r == 0) p += term;
    else if (r == 1) q += term;
    else if (r == 2) p -= term;
    else q -= term;
  }
  if (!converged) return std::nullopt;
  const real phi = (static_cast<real>(nu) / 2 + 0.25L) * pi_l;
  const real sx = std::sin(x), cx = std::cos(x);
  const real cphi = std::cos(phi), sphi = std::sin(phi);
  const real cos_chi = cx * cphi + sx * sphi;
  const real sin_chi = sx * cphi - cx * sphi;
  return static_cast<double>(std::sqrt(2 / (pi_l * x)) * (p * cos_chi - q * sin_chi));
}

// Backward recurrence normalized by
// (x/2)^nu0 = sum_k (nu0+2k) Gamma(nu0+k)/k! J_{nu0+2k}(x).
double bessel_miller(double alpha, double x) {
  const double nu0 = alpha - std::floor(alpha);
  const int target = static_cast<int>(std::floor(alpha));
  const int top = static_cast<int>(std::ceil(std::max(alpha, x))) + 60;
  const real xl = x;
  real above = 0, current = 1e-30L;
  real at_target = 0, norm = 0;
  auto weight = [&](int k) -> real {
    if (k == 0) return std::tgamma(static_cast<real>(nu0) + 1);
    return (nu0 + 2 * k) * std::exp(std::lgamma(static_cast<real>(nu0) + k) - std::lgamma(static_cast<real>(k) + 1));
  };
  for (int i = top; i >= 0; --i) {
    if (i == target) at_target = current;
    if (i % 2 == 0) norm += weight(i / 2) * current;
    if (i == 0) break;
    const real below = 2 * (nu0 + i) / xl * current - above;
    above = current;
    current = below;
    if (std::fabs(current) > 1e250L) {
      current *= 1e-250L;
      above *= 1e-250L;
      at_target *= 1e-250L;
      norm *= 1e-250L;
    }
  }
  return static_cast<double>(at_target * std::pow(xl / 2, static_cast<real>(nu0)) / norm);
}

void require_legendre_args(int n, int m, double t) {
  if (n < 2) fail(ErrorKind::domain, "sphere dimension must be >= 2");
  if (m < 0) fail(ErrorKind::domain, "degree must be nonnegative");
  if (!(std::fabs(t) <= 1.0)) fail(ErrorKind::domain, "Legendre argument must lie in [-1, 1]");
}

}  // namespace

double bessel_j(double alpha, double x) {
  if (!(x >= 0.0) || !std::isfinite(x)) fail(ErrorKind::domain, "bessel_j needs finite x >= 0");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) fail(ErrorKind::domain, "bessel_j needs alpha >= 0");
  if (x == 0.0) return alpha == 0.0 ? 1.0 : 0.0;
  if (is_half_integer(alpha) && x >= alpha) return bessel_half_integer(alpha, x);
  if (x <= series_limit) return bessel_series(alpha, x);
  if (auto h = bessel_hankel(alpha, x)) return *h;
  if (alpha < x) {
    const double nu0 = alpha - std::floor(alpha);
    auto a = bessel_hankel(nu0, x);
    auto b = bessel_hankel(nu0 + 1.0, x);
    if (a && b) {
      real lo = *a, hi = *b;
      const int steps = static_cast<int>(std::floor(alpha));
      if (steps == 0) return static_cast<double>(lo);
      for (int k = 1; k < steps; ++k) {
        const real next = 2 * (nu0 + k) / static_cast<real>(x) * hi - lo;
        lo = hi;
        hi = next;
      }
      return static_cast<double>(hi);
    }
  }
  return bessel_miller(alpha, x);
}

std::vector<double> legendre_muller_table(int n, int m_max, double t) {
  require_legendre_args(n, m_max, t);
  std::vector<double> p(static_cast<std::size_t>(m_max) + 1);
  p[0] = 1.0;
  if (m_max >= 1) p[1] = t;
  for (int m = 2; m <= m_max; ++m)
    p[m] = ((2.0 * m + n - 3) * t * p[m - 1] - (m - 1.0) * p[m - 2]) / (m + n - 2.0);
  return p;
}

double legendre_muller(int n, int m, double t) {
  return legendre_muller_table(n, m, t).back();
}

std::uint64_t multiplicity(int n, int m) {
  if (n < 2) fail(ErrorKind::domain, "sphere dimension must be >= 2");
  if (m < 0) fail(ErrorKind::domain, "degree must be nonnegative");
  using wide = unsigned __int128;
  constexpr wide limit = ~wide{0};
  wide c = 1;  // binom(m+n-2, n-2)
  for (int i = 1; i <= n - 2; ++i) {
    const wide factor = static_cast<wide>(m) + i;
    if (c > limit / factor)
      fail(ErrorKind::capacity, "multiplicity N(" + std::to_string(n) + "," + std::to_string(m) +
                                    ") overflows 128-bit arithmetic");
    c = c * factor / static_cast<wide>(i);
  }
  const wide lead = 2 * static_cast<wide>(m) + static_cast<wide>(n) - 1;
  if (c > limit / lead)
    fail(ErrorKind::capacity, "multiplicity N(" + std::to_string(n) + "," + std::to_string(m) +
                                  ") overflows 128-bit arithmetic");
  const wide value = lead * c / static_cast<wide>(n - 1);
  if (value > std::numeric_limits<std::uint64_t>::max())
    fail(ErrorKind::capacity, "multiplicity N(" + std::to_string(n) + "," + std::to_string(m) +
                                  ") exceeds 64 bits");
  return static_cast<std::uint64_t>(value);
}

double sphere_area_constant(int n) {
  if (n < 0) fail(ErrorKind::domain, "sphere dimension must be nonnegative");
  real even = 2, odd = 2 * pi_l;
  if (n == 0) return static_cast<double>(even);
  for (int k = 2; k <= n; ++k) {
    real& slot = (k % 2 == 0) ? even : odd;
    slot = 2 * pi_l * slot / (k - 1);
  }
  return static_cast<double>(n % 2 == 0 ? even : odd);
}

std::vector<double> generating_function_coeffs(int n, double t, int m_max) {
  if (n < 2) fail(ErrorKind::domain, "sphere dimension must be >= 2");
  if (m_max < 0) fail(ErrorKind::domain, "m_max must be nonnegative");
  if (!(std::fabs(t) < 1.0))
    fail(ErrorKind::conjugate, "generating function needs |t| < 1 (non-conjugate points)");
  // (1 - 2tz + z^2)^{-a} = sum C_m^{(a)}(t) z^m with a = (n+1)/2.
  const real a = (n + 1) / 2.0L;
  const real tl = t;
  std::vector<real> c(static_cast<std::size_t>(m_max) + 1);
  c[0] = 1;
  if (m_max >= 1) c[1] = 2 * tl * a;
  for (int m = 2; m <= m_max; ++m)
    c[m] = (2 * tl * (m - 1 + a) * c[m - 1] - (m - 2 + 2 * a) * c[m - 2]) / m;
  const real dn = sphere_area_constant(n);
  std::vector<double> out(c.size());
  for (int m = 0; m <= m_max; ++m) out[m] = static_cast<double>((c[m] + (m > 0 ? c[m - 1] : 0)) / dn);
  return out;
}

}  // namespace sflab::specialfn
