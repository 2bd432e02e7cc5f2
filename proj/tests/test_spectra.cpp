#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "sflab/error.hpp"
#include "sflab/numeric.hpp"
#include "sflab/spectra.hpp"
#include "sflab/specialfn.hpp"

using namespace sflab;
using namespace sflab::spectra;
using geometry::Matrix;
using geometry::Vector;

namespace {

// Brute-force eigen-sum on R^2 / basis Z^2, zero mode excluded.
double torus_oracle(const Matrix& basis, const Vector& disp, double lambda) {
  const Matrix dual = basis.inverse().transpose();
  const double vol = std::fabs(basis.determinant());
  const int box = 80;
  long double sum = 0;
  for (int i = -box; i <= box; ++i)
    for (int j = -box; j <= box; ++j) {
      if (i == 0 && j == 0) continue;
      const Eigen::Vector2d xi = dual * Eigen::Vector2d(i, j);
      if (two_pi * xi.norm() < lambda) sum += std::cos(two_pi * static_cast<long double>(disp.dot(xi)));
    }
  return static_cast<double>(sum / vol);
}

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("square torus first shell") {
  const auto lat = geometry::torus_lattice(geometry::SquareTorus{2});
  const auto diag = build_series_torus(lat, vec2(0, 0), 10.0);
  CHECK(evaluate_N(diag, 1.0 + 1e-9) == doctest::Approx(4.0 / (4 * pi * pi)));
  CHECK(evaluate_N(diag, 1.0) == 0.0);
  CHECK(evaluate_N(diag, 0.5) == 0.0);
  const auto anti = build_series_torus(lat, vec2(pi, pi), 10.0);
  REQUIRE(!anti.atoms().empty());
  CHECK(anti.atoms()[0].frequency == doctest::Approx(1.0));
  CHECK(anti.atoms()[0].coefficient == doctest::Approx(-4.0 / (4 * pi * pi)));
}

TEST_CASE("torus series agrees with the brute-force eigen-sum") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix hex(2, 2);
  hex << two_pi, pi, 0.0, pi * std::sqrt(3.0);
  for (const Matrix& basis : {Matrix(two_pi * Matrix::Identity(2, 2)), hex}) {
    const auto lat = geometry::dual_lattice(basis);
    for (int trial = 0; trial < 100; ++trial) {
      const Vector disp = basis * Eigen::Vector2d(u(rng), u(rng));
      const double lambda = 60.0 * u(rng);
      const auto series = build_series_torus(lat, disp, 61.0);
      CHECK(std::fabs(evaluate_N(series, lambda) - torus_oracle(basis, disp, lambda)) < 1e-10);
    }
  }
}

TEST_CASE("banded torus construction matches a single pass") {
  // 3-torus large enough to need several bands.
  const auto lat = geometry::torus_lattice(geometry::SquareTorus{3});
  Vector disp(3);
  disp << 0.3, 1.1, 2.9;
  const auto series = build_series_torus(lat, disp, 130.0);
  for (double lambda : {5.5, 77.7, 129.9}) {
    long double sum = 0;
    const int box = static_cast<int>(lambda) + 1;
    for (int i = -box; i <= box; ++i)
      for (int j = -box; j <= box; ++j)
        for (int k = -box; k <= box; ++k) {
          const double r2 = double(i) * i + double(j) * j + double(k) * k;
          if (r2 == 0 || r2 >= lambda * lambda) continue;
          sum += std::cos(static_cast<long double>(i * disp[0] + j * disp[1] + k * disp[2]));
        }
    const double expect = static_cast<double>(sum / std::pow(two_pi, 3));
    CHECK(evaluate_N(series, lambda) == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("circle equals the one-dimensional square torus") {
  for (double d : {0.5, 1.0, 2.0, 4.0}) {
    const auto circ = build_series_circle(d, 300.0);
    Vector disp(1);
    disp << d;
    const auto tor = build_series_torus(geometry::torus_lattice(geometry::SquareTorus{1}), disp, 300.0);
    REQUIRE(circ.atoms().size() == tor.atoms().size());
    for (double lambda = 0.3; lambda < 300.0; lambda += 1.37)
      CHECK(std::fabs(evaluate_N(circ, lambda) - evaluate_N(tor, lambda)) < 1e-12);
  }
}

TEST_CASE("circle closed form") {
  CHECK(spectral_function_circle(1.3, 0.7) == 0.0);
  CHECK(spectral_function_circle(1.3, 1.0) == doctest::Approx(0.0));
  CHECK(std::fabs(spectral_function_circle(pi, 2.5)) < 1e-15);
  CHECK(spectral_function_circle(pi / 3, 1.5) == doctest::Approx(1 / two_pi).epsilon(1e-14));
  CHECK_THROWS_AS(spectral_function_circle(two_pi, 3.0), Error);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ud(0.01, two_pi - 0.01), ul(0.0, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double d = ud(rng), lambda = ul(rng);
    const auto series = build_series_circle(d, 1e3);
    CHECK(std::fabs(evaluate_N(series, lambda) - spectral_function_circle(d, lambda)) < 1e-12);
  }
}

TEST_CASE("circle closed form matches the cosine sum up to 1e4") {
  for (double d : {0.5, 1.0, 2.0}) {
    long double sum = 0;
    for (int m = 1; m <= 10000; ++m) {
      // value for lambda in (m, m+1]: sum over 1 <= m' <= m
      sum += std::cos(m * static_cast<long double>(d));
      if (m % 7 == 0 || m > 9990) CHECK(std::fabs(spectral_function_circle(d, m + 0.5) - static_cast<double>(sum / pi)) < 1e-11);
    }
  }
}

TEST_CASE("sphere coefficients") {
  const auto diag = build_series_sphere(2, 0.0, 30.0);
  for (std::size_t j = 0; j < diag.atoms().size(); ++j) {
    const int m = static_cast<int>(j) + 1;
    CHECK(diag.atoms()[j].coefficient == doctest::Approx((2.0 * m + 1) / (4 * pi)));
    CHECK(diag.atoms()[j].frequency == doctest::Approx(std::sqrt(m * (m + 1.0))));
  }
  const auto anti = build_series_sphere(2, pi, 30.0);
  for (std::size_t j = 0; j < anti.atoms().size(); ++j) {
    const int m = static_cast<int>(j) + 1;
    CHECK(anti.atoms()[j].coefficient == doctest::Approx((m % 2 ? -1.0 : 1.0) * (2.0 * m + 1) / (4 * pi)));
  }
  const auto eq = build_series_sphere(2, pi / 2, 30.0);
  CHECK(eq.atoms()[1].coefficient == doctest::Approx(-5.0 / (8 * pi)));
}

TEST_CASE("sphere diagonal telescopes") {
  const auto diag = build_series_sphere(2, 0.0, 200.0);
  for (int m = 1; m < 190; ++m) {
    const double lam = std::sqrt(m * (m + 1.0));
    CHECK(evaluate_N(diag, lam * (1 + 1e-9)) == doctest::Approx(((m + 1.0) * (m + 1) - 1) / (4 * pi)));
  }
}

TEST_CASE("sphere series agrees with independent Legendre oracles") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> us(0.05, pi - 0.05), ul(0.0, 150.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double s = us(rng), lambda = ul(rng);
    const auto two = build_series_sphere(2, s, 151.0);
    long double sum2 = 0;
    for (int m = 1; m * (m + 1.0) < lambda * lambda; ++m) sum2 += (2 * m + 1) * std::legendre(m, std::cos(s));
    CHECK(std::fabs(evaluate_N(two, lambda) - static_cast<double>(sum2 / (4 * pi))) < 1e-10);
    // S^3 zonal harmonic: sin((m+1)s) / ((m+1) sin s), multiplicity (m+1)^2.
    const auto three = build_series_sphere(3, s, 151.0);
    long double sum3 = 0;
    for (int m = 1; m * (m + 2.0) < lambda * lambda; ++m)
      sum3 += (m + 1.0L) * std::sin((m + 1.0L) * s) / std::sin(static_cast<long double>(s));
    CHECK(std::fabs(evaluate_N(three, lambda) - static_cast<double>(sum3 / (2 * pi * pi))) < 1e-10);
  }
}

TEST_CASE("sphere conjugate-point closed forms") {
  SeriesOptions with_zero;
  with_zero.include_zero_mode = true;
  for (int n : {2, 3, 4}) {
    const auto diag = build_series_sphere(n, 0.0, 80.0, with_zero);
    const auto anti = build_series_sphere(n, pi, 80.0, with_zero);
    const double dn = specialfn::sphere_area_constant(n);
    for (int m = 0; m < 60; ++m) {
      const double lam = std::sqrt(m * (m + n - 1.0)) * (1 + 1e-9) + 1e-9;
      const double ratio = std::exp(std::lgamma(n + m) - std::lgamma(m + 1.0) - std::lgamma(n + 1.0));
      CHECK(evaluate_N(diag, lam) == doctest::Approx((n + 2.0 * m) * ratio / dn).epsilon(1e-11));
      CHECK(evaluate_N(anti, lam) == doctest::Approx((m % 2 ? -1.0 : 1.0) * n * ratio / dn).epsilon(1e-11));
    }
  }
}

TEST_CASE("sphere partial sums equal the generating-function coefficients") {
  SeriesOptions with_zero;
  with_zero.include_zero_mode = true;
  const auto series = build_series_sphere(3, 1.0, 60.0, with_zero);
  const auto coeffs = specialfn::generating_function_coeffs(3, std::cos(1.0), 50);
  for (int m = 0; m <= 50; ++m) CHECK(std::fabs(series.partial_sum(m + 1) - coeffs[m]) < 1e-10);
}

TEST_CASE("Darboux main term tracks the sphere spectral function") {
  const auto coeffs = specialfn::generating_function_coeffs(2, std::cos(1.0), 4000);
  double worst = 0;
  for (int m = 1000; m <= 4000; ++m)
    worst = std::max(worst, std::fabs(coeffs[m] - sphere_darboux_main(2, 1.0, m)) * std::sqrt(m));
  // O(m^{-1/2}) residual: the scaled error stays bounded.
  CHECK(worst < 1.0);
  CHECK(std::fabs(sphere_darboux_main(2, 1.0, 4000)) > 1.0);
}

TEST_CASE("evaluation contract") {
  const auto series = build_series_circle(1.0, 50.0);
  CHECK_THROWS_AS(evaluate_N(series, 50.5), Error);
  try {
    evaluate_N(series, 51.0);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::cutoff);
  }
  CHECK(evaluate_N(series, 50.0) == doctest::Approx(spectral_function_circle(1.0, 50.0)));
  const auto r = evaluate_rescaled(build_series_sphere(2, 1.0, 100.0), 37.0);
  CHECK(r.value * std::sqrt(37.0) == doctest::Approx(evaluate_N(build_series_sphere(2, 1.0, 100.0), 37.0)));
}

TEST_CASE("jumps equal atom coefficients and diagonal is monotone") {
  const auto lat = geometry::torus_lattice(geometry::SquareTorus{2});
  const auto off = build_series_torus(lat, vec2(0.4, 1.7), 40.0);
  for (std::size_t j = 1; j + 1 < off.atoms().size(); ++j) {
    const auto& a = off.atoms()[j];
    const double gap = std::min(a.frequency - off.atoms()[j - 1].frequency, off.atoms()[j + 1].frequency - a.frequency);
    const double eps = 0.25 * gap;
    CHECK(evaluate_N(off, a.frequency + eps) - evaluate_N(off, a.frequency - eps) == doctest::Approx(a.coefficient));
    // Left-closed: the jump is not counted at the frequency itself.
    CHECK(evaluate_N(off, a.frequency) == evaluate_N(off, a.frequency - eps));
  }
  const auto diag = build_series_torus(lat, vec2(0, 0), 40.0);
  double prev = 0;
  for (double lambda = 0; lambda <= 40; lambda += 0.01) {
    const double v = evaluate_N(diag, lambda);
    CHECK(v >= prev);
    prev = v;
  }
  for (const auto& a : diag.atoms()) CHECK(a.coefficient > 0);
}

TEST_CASE("capacity cap on torus series") {
  SeriesOptions small;
  small.cap = 1000;
  const auto lat = geometry::torus_lattice(geometry::SquareTorus{2});
  try {
    build_series_torus(lat, vec2(1, 1), 500.0, small);
    FAIL("expected capacity error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::capacity);
  }
}

TEST_CASE("Weyl leading term and Weyl law") {
  CHECK(weyl_leading(2, 3.0) == doctest::Approx(9.0 / (4 * pi)));
  CHECK(weyl_leading(1, 3.0) == doctest::Approx(3.0 / pi));
  CHECK(weyl_leading(3, 0.0) == 0.0);
  const auto lat = geometry::torus_lattice(geometry::SquareTorus{2});
  const auto tor = build_series_torus(lat, vec2(0, 0), 500.0);
  const auto sph = build_series_sphere(2, 0.0, 500.0);
  for (const auto* series : {&tor, &sph}) {
    std::vector<double> lam, res;
    for (double center = 50; center < 500; center *= 1.15) {
      double worst = 0;
      for (double l = center; l < center * 1.15 && l <= 500; l += 0.05)
        worst = std::max(worst, std::fabs(evaluate_N(*series, l) - weyl_leading(2, l)));
      lam.push_back(center);
      res.push_back(worst);
      CHECK(worst <= 2.0 * center);
    }
    CHECK(fit_log_log(lam, res).slope <= 1.1);
  }
}

TEST_CASE("Euclidean closed forms") {
  CHECK(std::fabs(euclidean_N(1, 1.0, pi)) < 1e-15);
  for (double x : {0.3, 2.0, 17.0}) CHECK(euclidean_N(1, 1.0, x) == doctest::Approx(std::sin(x) / pi));
  CHECK(euclidean_N(3, 1.0, pi) == doctest::Approx(1 / two_pi).epsilon(1e-13));
  for (double d : {0.2, 1.0, 3.0})
    for (double l : {0.5, 4.0, 60.0}) {
      const double x = d * l;
      CHECK(euclidean_N(3, d, l) == doctest::Approx((std::sin(x) - x * std::cos(x)) / (2 * pi * pi * d * d * d)));
    }
  for (int n = 1; n <= 6; ++n) CHECK(euclidean_N(n, 0.7, 0.0) == 0.0);
  CHECK_THROWS_AS(euclidean_N(2, 0.0, 1.0), Error);
  for (int n = 1; n <= 5; ++n)
    CHECK(euclidean_N_regular(n, 1e-7, 3.0) == doctest::Approx(weyl_leading(n, 3.0)).epsilon(1e-9));
}

TEST_CASE("Euclidean sine asymptotic") {
  for (double l : {2.0, 10.0, 300.0}) CHECK(euclidean_N_asymptotic(1, 0.9, l) == doctest::Approx(euclidean_N(1, 0.9, l)));
  // n = 3: the remainder is exactly sin(d lambda) / (2 pi^2 d^3), of order lambda^0.
  const double r3 = euclidean_N(3, 1.0, 50.0) - euclidean_N_asymptotic(3, 1.0, 50.0);
  CHECK(r3 == doctest::Approx(std::sin(50.0) / (2 * pi * pi)).epsilon(1e-10));
  CHECK(std::fabs(r3) <= 1.05 / (2 * pi * pi));
  CHECK_THROWS_AS(euclidean_N_asymptotic(2, 0.1, 5.0), Error);
  std::vector<double> lam, res;
  for (double l = 100; l <= 6400; l *= 2) {
    double worst = 0;
    for (double x = l; x < l + 2 * pi; x += 0.01)
      worst = std::max(worst, std::fabs(euclidean_N(2, 2.0, x) - euclidean_N_asymptotic(2, 2.0, x)));
    lam.push_back(l);
    res.push_back(worst);
  }
  CHECK(fit_log_log(lam, res).slope == doctest::Approx(-0.5).epsilon(0.1));
}

TEST_CASE("series export format") {
  const auto series = build_series_circle(1.0, 3.0);
  std::ostringstream os;
  write_series(os, series);
  const std::string text = os.str();
  CHECK(text.find("frequency,coefficient\n1,0.17198") != std::string::npos);
  CHECK(text.rfind("3,") != std::string::npos);
}
