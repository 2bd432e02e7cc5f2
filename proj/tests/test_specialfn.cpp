#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "sflab/error.hpp"
#include "sflab/numeric.hpp"
#include "sflab/specialfn.hpp"

using namespace sflab;
using namespace sflab::specialfn;

namespace {

// Power series of f^p for f_0 = 1 (J.C.P. Miller recurrence).
std::vector<long double> series_power(const std::vector<long double>& f, long double p, int m) {
  std::vector<long double> g(m + 1, 0.0L);
  g[0] = 1;
  for (int k = 1; k <= m; ++k) {
    long double acc = 0;
    for (int j = 1; j <= k && j < static_cast<int>(f.size()); ++j)
      acc += ((p + 1) * j - k) * f[j] * g[k - j];
    g[k] = acc / k;
  }
  return g;
}

// Taylor coefficients of (1 + z^2 - 2zt)^{-(n+1)/2} times `numerator`.
std::vector<long double> taylor_oracle(int n, double t, const std::vector<long double>& numerator, int m) {
  const std::vector<long double> f = {1.0L, -2.0L * t, 1.0L};
  const auto g = series_power(f, -(n + 1) / 2.0L, m);
  std::vector<long double> out(m + 1, 0.0L);
  for (int k = 0; k <= m; ++k)
    for (std::size_t j = 0; j < numerator.size() && j <= static_cast<std::size_t>(k); ++j)
      out[k] += numerator[j] * g[k - j];
  return out;
}

// Ascending series summed in long double to full convergence.
double bessel_oracle_series(double a, double x) {
  long double h = x / 2.0L, term = std::pow(h, (long double)a) / std::tgamma((long double)a + 1), sum = term;
  for (int k = 1; k < 400; ++k) {
    term *= -h * h / (k * (k + (long double)a));
    sum += term;
  }
  return static_cast<double>(sum);
}

// (1/pi) int_0^pi cos(a tau - x sin tau) d tau, integer a, composite Gauss-Legendre.
double bessel_oracle_integral(int a, double x) {
  const auto& rule = gauss_legendre(40);
  const int panels = 8 + static_cast<int>(x);
  CompensatedSum s;
  for (int p = 0; p < panels; ++p) {
    const double lo = pi * p / panels, hi = pi * (p + 1) / panels;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double tau = 0.5 * (lo + hi) + 0.5 * (hi - lo) * rule.nodes[i];
      s.add(0.5 * (hi - lo) * rule.weights[i] * std::cos(a * tau - x * std::sin(tau)));
    }
  }
  return s.value() / pi;
}

}  // namespace

TEST_CASE("Bessel closed forms and origin") {
  CHECK(bessel_j(0.5, 1.0) == doctest::Approx(std::sqrt(2.0 / pi) * std::sin(1.0)).epsilon(1e-12));
  CHECK(std::fabs(bessel_j(0.5, 1.0) - 0.6713967071418031) < 1e-12);
  CHECK(bessel_j(0.0, 0.0) == 1.0);
  CHECK(bessel_j(2.5, 0.0) == 0.0);
  CHECK(std::fabs(bessel_j(1.0, 1.0) - 0.4400505857449335) < 1e-15);
  CHECK(std::fabs(bessel_j(1.0, 1.0) - bessel_oracle_series(1.0, 1.0)) < 1e-15);
  const double x = 7.3;
  CHECK(std::fabs(bessel_j(1.5, x) - std::sqrt(2 / (pi * x)) * (std::sin(x) / x - std::cos(x))) < 1e-13);
}

TEST_CASE("Bessel rejects negative arguments") {
  CHECK_THROWS_AS(bessel_j(1.0, -1.0), Error);
  CHECK_THROWS_AS(bessel_j(-0.5, 1.0), Error);
}

TEST_CASE("Bessel agrees with the ascending-series oracle for small x") {
  for (double a : {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 7.25, 12.0, 25.0})
    for (double x = 0.05; x <= 12.0; x += 0.37) CHECK(std::fabs(bessel_j(a, x) - bessel_oracle_series(a, x)) < 1e-12);
}

TEST_CASE("Bessel agrees with the integral representation") {
  for (int a : {0, 1, 2, 3, 5, 10, 25})
    for (double x : {0.3, 2.0, 9.5, 19.9, 20.1, 24.0, 31.0, 55.5, 120.0, 777.7})
      CHECK(std::fabs(bessel_j(a, x) - bessel_oracle_integral(a, x)) < 1e-10);
}

TEST_CASE("Bessel agrees with the standard library over the full range") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ua(0.0, 25.0), ulx(-3.0, 4.0);
  double worst = 0;
  for (int i = 0; i < 20000; ++i) {
    double a = ua(rng);
    if (i % 4 == 0) a = std::round(2 * a) / 2;  // integer and half-integer orders
    const double x = std::pow(10.0, ulx(rng));
    worst = std::max(worst, std::fabs(bessel_j(a, x) - std::cyl_bessel_j(a, x)));
  }
  CHECK(worst < 1e-10);
  for (double a : {0.0, 1.0, 1.5, 2.5, 3.0})
    for (double x : {20.0, 20.0000001, 40044.0, 1e4}) CHECK(std::fabs(bessel_j(a, x) - std::cyl_bessel_j(a, x)) < 1e-10);
}

TEST_CASE("Bessel three-term recurrence") {
  for (double a = 1.0; a <= 24.0; a += 0.75)
    for (double x = 0.5; x <= 2000.0; x *= 1.7) {
      const double lhs = bessel_j(a - 1, x) + bessel_j(a + 1, x);
      const double rhs = 2 * a / x * bessel_j(a, x);
      CHECK(std::fabs(lhs - rhs) < 1e-9);
    }
}

TEST_CASE("Mueller-Legendre special values") {
  for (int n = 2; n <= 6; ++n)
    for (int m : {0, 1, 2, 7, 100, 5000}) CHECK(legendre_muller(n, m, 1.0) == 1.0);
  for (int n = 2; n <= 6; ++n) CHECK(legendre_muller(n, 1, 0.37) == 0.37);
  CHECK(legendre_muller(2, 2, 0.3) == doctest::Approx(-0.365).epsilon(1e-14));
  CHECK_THROWS_AS(legendre_muller(2, 3, 1.5), Error);
}

TEST_CASE("Mueller-Legendre matches the generating function (1-z^2)(1+z^2-2zt)^{-(n+1)/2}") {
  for (int n : {2, 3, 5})
    for (double t : {-0.9, -0.2, 0.3, 0.81}) {
      const auto taylor = taylor_oracle(n, t, {1.0L, 0.0L, -1.0L}, 40);
      for (int m = 0; m <= 40; ++m) {
        const double expect = static_cast<double>(taylor[m] / multiplicity(n, m));
        CHECK(legendre_muller(n, m, t) == doctest::Approx(expect).epsilon(1e-10));
      }
    }
}

TEST_CASE("Mueller-Legendre values are bounded by one") {
  for (int n : {2, 3, 4})
    for (double t = -1.0; t <= 1.0; t += 0.0137) {
      const auto p = legendre_muller_table(n, 5000, t);
      for (double v : p) CHECK(std::fabs(v) <= 1.0 + 1e-12);
    }
}

TEST_CASE("Mueller-Legendre parity at t=-1") {
  const auto p = legendre_muller_table(3, 50, -1.0);
  for (int m = 0; m <= 50; ++m) CHECK(p[m] == doctest::Approx(m % 2 ? -1.0 : 1.0));
}

TEST_CASE("Mueller-Legendre orthogonality") {
  for (int n : {2, 3, 4}) {
    const auto& rule = gauss_legendre(60);
    const double dn = sphere_area_constant(n), dn1 = sphere_area_constant(n - 1);
    for (int m = 0; m <= 20; ++m)
      for (int k = m; k <= 20; ++k) {
        CompensatedSum s;
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
          // Substitute t = cos(theta) to absorb the endpoint weight for odd n.
          const double theta = 0.5 * pi * (rule.nodes[i] + 1);
          const double t = std::cos(theta);
          const double w = 0.5 * pi * rule.weights[i] * std::pow(std::sin(theta), n - 1);
          s.add(w * legendre_muller(n, m, t) * legendre_muller(n, k, t));
        }
        const double expect = m == k ? dn / (dn1 * multiplicity(n, m)) : 0.0;
        CHECK(std::fabs(s.value() - expect) < 1e-8);
      }
  }
}

TEST_CASE("multiplicities") {
  CHECK(multiplicity(2, 1) == 3);
  CHECK(multiplicity(3, 2) == 9);
  for (int n = 2; n <= 12; ++n) CHECK(multiplicity(n, 0) == 1);
  std::uint64_t partial = 0;
  for (int m = 0; m <= 300; ++m) {
    partial += multiplicity(2, m);
    CHECK(partial == static_cast<std::uint64_t>((m + 1) * (m + 1)));
  }
  for (int m = 0; m <= 40; ++m) CHECK(multiplicity(3, m) == static_cast<std::uint64_t>((m + 1) * (m + 1)));
  for (int n = 2; n <= 8; ++n)
    for (int m = 0; m <= 30; ++m) {
      const double gamma_form = (2.0 * m + n - 1) * std::exp(std::lgamma(m + n - 1.0) - std::lgamma(m + 1.0) - std::lgamma(n));
      CHECK(static_cast<double>(multiplicity(n, m)) == doctest::Approx(gamma_form).epsilon(1e-10));
    }
  CHECK_THROWS_AS(multiplicity(60, 1000000), Error);
}

TEST_CASE("sphere area constants") {
  CHECK(sphere_area_constant(1) == doctest::Approx(two_pi).epsilon(1e-15));
  CHECK(sphere_area_constant(2) == doctest::Approx(4 * pi).epsilon(1e-15));
  CHECK(sphere_area_constant(3) == doctest::Approx(2 * pi * pi).epsilon(1e-15));
  for (int n = 1; n <= 12; ++n)
    CHECK(sphere_area_constant(n) ==
          doctest::Approx(2 * std::pow(pi, (n + 1) / 2.0) / std::tgamma((n + 1) / 2.0)).epsilon(1e-14));
}

TEST_CASE("generating function partial sums") {
  for (int n : {2, 3, 4}) CHECK(generating_function_coeffs(n, 0.4, 0)[0] == doctest::Approx(1 / sphere_area_constant(n)));
  auto direct = [](int n, double t, int m_max) {
    std::vector<double> out;
    CompensatedSum s;
    for (int m = 0; m <= m_max; ++m) {
      s.add(multiplicity(n, m) * legendre_muller(n, m, t) / sphere_area_constant(n));
      out.push_back(s.value());
    }
    return out;
  };
  const auto a = generating_function_coeffs(2, std::cos(1.0), 10);
  CHECK(std::fabs(a[10] - direct(2, std::cos(1.0), 10)[10]) < 1e-11);
  const auto b = generating_function_coeffs(3, 0.0, 6);
  CHECK(std::fabs(b[6] - direct(3, 0.0, 6)[6]) < 1e-11);
  for (int n : {2, 3})
    for (double t : {-0.6, 0.1, 0.77}) {
      const auto taylor = taylor_oracle(n, t, {1.0L, 1.0L}, 60);
      const auto g = generating_function_coeffs(n, t, 60);
      for (int m = 0; m <= 60; ++m) CHECK(std::fabs(g[m] - static_cast<double>(taylor[m] / sphere_area_constant(n))) < 1e-11);
    }
  CHECK_THROWS_AS(generating_function_coeffs(2, 1.0, 5), Error);
}
