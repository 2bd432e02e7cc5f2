#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sflab/error.hpp"
#include "sflab/harness.hpp"
#include "sflab/spectra.hpp"

using namespace sflab;
using namespace sflab::harness;

namespace {

geometry::ModelManifold square2() { return geometry::SquareTorus{2}; }

geometry::ModelManifold hex_torus() {
  Eigen::Matrix2d b;
  b << two_pi, pi, 0.0, pi * std::sqrt(3.0);
  return geometry::FlatTorus2{b};
}

// Displacement of node idx in ambient coordinates for an N^2 grid.
geometry::Vector node_displacement(const geometry::ModelManifold& m, int N, std::size_t idx) {
  const auto lat = geometry::torus_lattice(m);
  geometry::Vector u(2);
  u[0] = static_cast<double>(idx / N) / N;
  u[1] = static_cast<double>(idx % N) / N;
  return lat.basis() * u;
}

}  // namespace

TEST_CASE("quadrature rules integrate constants to the volume") {
  CHECK(torus_grid_rule(square2(), 64).total_weight() == doctest::Approx(4 * pi * pi).epsilon(1e-12));
  CHECK(torus_grid_rule(hex_torus(), 32).total_weight() ==
        doctest::Approx(2 * pi * pi * std::sqrt(3.0)).epsilon(1e-12));
  CHECK(torus_grid_rule(geometry::Circle{}, 64).total_weight() == doctest::Approx(two_pi).epsilon(1e-12));
  CHECK(std::fabs(sphere_gauss_rule(2, 200).total_weight() / (4 * pi) - 1) < 1e-10);
  CHECK(std::fabs(sphere_gauss_rule(3, 200).total_weight() / (2 * pi * pi) - 1) < 1e-10);
  CHECK(std::fabs(disc_polar_rule(1.5, 40, 3).total_weight() / (pi * 2.25) - 1) < 1e-12);
  for (double w : sphere_gauss_rule(2, 50).weights) CHECK(w > 0);
}

TEST_CASE("torus grid distances") {
  const auto rule = torus_grid_rule(square2(), 16);
  CHECK(rule.distance[0] == 0.0);
  // Node (8, 8) is the point (pi, pi), at distance pi sqrt 2.
  CHECK(rule.distance[8 * 16 + 8] == doctest::Approx(pi * std::sqrt(2.0)));
  CHECK(rule.distance[1] == rule.distance[15]);
  CHECK(rule.distance[1] == rule.distance[16]);
  CHECK(rule.unique_distance.size() < rule.size() / 4);
  const auto hex = torus_grid_rule(hex_torus(), 12);
  const auto lat = geometry::torus_lattice(hex_torus());
  for (std::size_t idx : {5u, 17u, 77u, 143u})
    CHECK(hex.distance[idx] == doctest::Approx(geometry::torus_distance(lat, node_displacement(hex_torus(), 12, idx))));
}

TEST_CASE("resolution guard names the required node count") {
  const auto rule = torus_grid_rule(square2(), 64);
  CHECK_NOTHROW(check_resolution(rule, 16.0));
  try {
    check_resolution(rule, 100.0);
    FAIL("expected resolution error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::resolution);
    CHECK(std::string(e.what()).find("required 400") != std::string::npos);
  }
  CHECK_THROWS_AS(FieldEvaluator(sphere_gauss_rule(2, 50), 40.0), Error);
}

TEST_CASE("FFT torus field matches the exact spectral series") {
  for (const auto& m : {square2(), hex_torus()}) {
    const int N = 64;
    const auto rule = torus_grid_rule(m, N);
    FieldEvaluator field(rule, 15.0);
    const auto lat = geometry::torus_lattice(m);
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::size_t> pick(0, rule.size() - 1);
    for (double lambda : {3.3, 9.0, 15.0}) {
      const auto values = field.values(lambda);
      for (int trial = 0; trial < 12; ++trial) {
        const std::size_t idx = pick(rng);
        const auto series = spectra::build_series_torus(lat, node_displacement(m, N, idx), 16.0);
        CHECK(values[idx] == doctest::Approx(spectra::evaluate_N(series, lambda)).epsilon(1e-10).scale(1.0));
      }
    }
  }
}

TEST_CASE("sphere field matches the exact spectral series") {
  for (int n : {2, 3}) {
    const auto rule = sphere_gauss_rule(n, 80);
    FieldEvaluator field(rule, 30.0);
    for (double lambda : {2.5, 17.2, 30.0}) {
      const auto values = field.values(lambda);
      for (std::size_t i : {0u, 13u, 40u, 79u}) {
        const auto series = spectra::build_series_sphere(n, rule.angle[i], 31.0);
        CHECK(values[i] == doctest::Approx(spectra::evaluate_N(series, lambda)).epsilon(1e-11).scale(1.0));
      }
    }
  }
}

TEST_CASE("Euclidean term on a disc agrees with radial quadrature") {
  const double R = 1.3;
  for (double lambda : {5.0, 20.0}) {
    const auto rule = disc_polar_rule(R, 200, 7);
    const double grid[] = {lambda};
    ManifoldAverageOptions opt;
    opt.fit_min = 0.0;
    const auto rep = verify_manifold_average(grid, rule, opt);
    // 2 pi int_0^R r |lambda^{-1/2} (2 pi)^{-1} (lambda / r) J_1(lambda r)|^2 dr, composite Simpson.
    auto f = [&](double r) {
      if (r == 0.0) return 0.0;
      const double v = std::pow(lambda, -0.5) * lambda * std::cyl_bessel_j(1.0, lambda * r) / (two_pi * r);
      return two_pi * r * v * v;
    };
    const int M = 200000;
    const double h = R / M;
    double s = f(0.0) + f(R);
    for (int i = 1; i < M; ++i) s += (i % 2 ? 4.0 : 2.0) * f(i * h);
    const double oracle = s * h / 3;
    CHECK(std::fabs(rep.values.at("integral")[0] / oracle - 1) < 1e-8);
  }
}

TEST_CASE("weighted average with kappa = 0 is the lattice count (Parseval)") {
  const auto rule = torus_grid_rule(square2(), 128);
  const double kappas[] = {0.0};
  const double grid[] = {7.5, 20.0, 30.0};
  const auto reps = verify_weighted_average(kappas, grid, rule, 0.0);
  for (int i = 0; i < 3; ++i) {
    const double lambda = grid[i];
    int count = 0;
    for (int a = -40; a <= 40; ++a)
      for (int b = -40; b <= 40; ++b)
        if ((a || b) && a * a + b * b < lambda * lambda) ++count;
    const double expect = count / (4 * pi * pi) / lambda;
    CHECK(reps[0].values.at("integral")[i] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("weighted averages order by kappa near the diagonal") {
  const auto rule = torus_grid_rule(square2(), 256);
  const double kappas[] = {0.0, 1.0, 2.0};
  const auto grid = logspace(10.0, 60.0, 8);
  const auto reps = verify_weighted_average(kappas, grid, rule, 10.0);
  REQUIRE(reps.size() == 3);
  CHECK(reps[0].find_check("exponent_error")->pass);
  CHECK(reps[2].find_fit("growth")->fit.slope < reps[0].find_fit("growth")->fit.slope);
  CHECK(reps[1].find_check("log_ratio_spread") != nullptr);
  for (const auto& r : reps) CHECK(recheck(r));
}

TEST_CASE("manifold average on a coarse torus") {
  const auto rule = torus_grid_rule(square2(), 256);
  const auto fine = torus_grid_rule(square2(), 512);
  const auto grid = logspace(1.0, 60.0, 12);
  ManifoldAverageOptions opt;
  opt.refined = &fine;
  const auto rep = verify_manifold_average(grid, rule, opt);
  CHECK(rep.find_check("sup_finite")->pass);
  CHECK(rep.find_check("refinement_change")->pass);
  CHECK(recheck(rep));
  ManifoldAverageOptions mutated;
  mutated.euclid_scale = 2.0;
  const auto bad = verify_manifold_average(grid, rule, mutated);
  CHECK(bad.find_fit("growth")->fit.slope > rep.find_fit("growth")->fit.slope + 0.3);
  // lambda below the first eigenvalue: only the small Euclidean term survives.
  const double tiny[] = {0.5};
  const auto low = verify_manifold_average(tiny, rule, ManifoldAverageOptions{1.0, 0.15, 0.0});
  // Plancherel: the whole-plane integral of the Euclidean term is lambda / (4 pi).
  CHECK(low.values.at("integral")[0] < 0.5 / (4 * pi));
  CHECK(low.values.at("integral")[0] > 0.0);
}

TEST_CASE("exceptional set measure") {
  const auto rule = torus_grid_rule(square2(), 256);
  const double mus[] = {0.5, 1.0, 2.0, 4.0, 1e6};
  const auto a = exceptional_set_measure(rule, 50.0, mus, 0.05);
  const auto b = exceptional_set_measure(rule, 50.0, mus, 0.1);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(b[i].measure <= a[i].measure);
    if (i) CHECK(a[i].measure <= a[i - 1].measure);
  }
  CHECK(a.back().measure == 0.0);
  CHECK(a.front().measure > 0.0);
  const double lambdas[] = {30.0, 50.0};
  const auto rep = exceptional_set_scan(rule, lambdas, mus, 0.05);
  CHECK(rep.values.at("measure_lambda=50") == std::vector<double>{a[0].measure, a[1].measure, a[2].measure,
                                                                  a[3].measure, a[4].measure});
}

TEST_CASE("sequence corollary fractions") {
  const auto rule = torus_grid_rule(square2(), 256);
  std::vector<double> taus, mus;
  for (int k = 1; k <= 6; ++k) {
    taus.push_back(10.0 * k);
    mus.push_back(0.2 * k);
  }
  const double ts[] = {0.5, 1.0, 1e9};
  const auto rep = sequence_corollary_check(rule, taus, mus, ts);
  const auto& prefix = rep.values.at("fraction_t=0.5");
  const auto& tail = rep.values.at("tail_fraction_t=0.5");
  for (std::size_t k = 1; k < prefix.size(); ++k) {
    CHECK(prefix[k] >= prefix[k - 1]);
    CHECK(tail[k] <= tail[k - 1]);
  }
  for (double v : rep.values.at("fraction_t=1e+09")) CHECK(v == 0.0);
  // K = 1 is a single superlevel-set measurement.
  FieldEvaluator field(rule, 10.0);
  const auto N = field.values(10.0);
  double m = 0;
  for (std::size_t i = 0; i < N.size(); ++i)
    if (std::fabs(N[i] / std::sqrt(10.0)) / 0.2 > 0.5) m += rule.weights[i];
  CHECK(prefix[0] == doctest::Approx(m / (4 * pi * pi)).epsilon(1e-12));
}

TEST_CASE("lower bound running average on the circle") {
  const auto pair = geometry::make_circle_pair(1.0);
  const auto grid = logspace(100.0, 1e4, 60);
  const auto rep = verify_lower_bound(pair, grid);
  CHECK(rep.find_check("window_min")->pass);
  CHECK(rep.find_check("trend_slope")->pass);
  LowerBoundOptions p2;
  p2.p = 2.0;
  const auto rep2 = verify_lower_bound(pair, grid, p2);
  const auto& a1 = rep.values.at("running_average");
  const auto& a2 = rep2.values.at("running_average");
  for (std::size_t i = 0; i < grid.size(); ++i) CHECK(a2[i] >= a1[i] * a1[i] * (1 - 1e-12));
  LowerBoundOptions q1;
  q1.q = 1.0;
  CHECK(verify_lower_bound(pair, grid, q1).find_check("window_min")->pass);
  CHECK_THROWS_AS(verify_lower_bound(geometry::make_circle_pair(0.0), grid), Error);
  CHECK_THROWS_AS(verify_lower_bound(geometry::make_sphere_pair(2, pi), grid), Error);
}

TEST_CASE("lower bound integral against midpoint quadrature") {
  const auto series = spectra::build_series_sphere(2, 1.2, 60.0);
  const double grid[] = {7.3, 33.0, 60.0};
  LowerBoundOptions opt;
  opt.q = 0.5;
  opt.p = 1.5;
  const auto rep = verify_lower_bound(series, grid, opt);
  double acc = 0;
  const double h = 1e-4;
  std::size_t g = 0;
  for (double x = 0.5 * h; g < 3; x += h) {
    acc += h * std::pow(x, 0.5) * std::pow(std::fabs(spectra::evaluate_rescaled(series, x).value), 1.5);
    if (x + 0.5 * h >= grid[g] - 1e-9) {
      CHECK(rep.values.at("running_average")[g] == doctest::Approx(acc * std::pow(grid[g], -1.5)).epsilon(1e-4));
      ++g;
    }
  }
}

TEST_CASE("log divergence on the circle") {
  const auto series = spectra::build_series_circle(1.0, 1e4);
  const auto rep = log_divergence_check(series, 1e4);
  CHECK(rep.find_check("I_log_r_squared")->pass);
  CHECK(rep.find_check("J_increment_growth")->pass);
  CHECK(rep.values.at("J_decade_increment").size() == 3);
  // I(10) by brute force.
  double acc = 0;
  const double h = 1e-5;
  for (double x = 1 + 0.5 * h; x < 10; x += h) {
    const double v = spectra::evaluate_N(series, x);
    acc += h * v * v / x;
  }
  const auto& lam = rep.grids.at("lambda");
  const auto at10 = std::find(lam.begin(), lam.end(), 10.0) - lam.begin();
  CHECK(rep.values.at("I")[at10] == doctest::Approx(acc).epsilon(1e-6));
  const spectra::SpectralSeries empty(1, {}, 1e4, false, {}, "empty");
  const auto zero = log_divergence_check(empty, 1e4);
  for (double v : zero.values.at("I")) CHECK(v == 0.0);
  CHECK(zero.passed());
}

TEST_CASE("reports serialize and recheck") {
  const auto series = spectra::build_series_circle(1.0, 1e3);
  auto rep = verify_lower_bound(series, logspace(10.0, 1e3, 20));
  const auto j = to_json(rep);
  CHECK(j["scan_id"] == "lower_bound");
  CHECK(j["checks"].size() == rep.checks.size());
  CHECK(recheck(rep));
  rep.checks[0].pass = !rep.checks[0].pass;
  CHECK_FALSE(recheck(rep));
}

TEST_CASE("reports are identical across thread counts") {
  const auto grid = logspace(2.0, 40.0, 6);
  std::string dumps[3];
  const unsigned threads[] = {1, 4, 8};
  for (int i = 0; i < 3; ++i) {
    set_thread_count(threads[i]);
    const auto rule = torus_grid_rule(hex_torus(), 160);
    dumps[i] = to_json(verify_manifold_average(grid, rule)).dump();
  }
  set_thread_count(1);
  CHECK(dumps[0] == dumps[1]);
  CHECK(dumps[0] == dumps[2]);
}
