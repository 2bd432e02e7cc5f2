#include "sflab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "sflab/error.hpp"
#include "sflab/numeric.hpp"

namespace sflab::geometry {

namespace {

constexpr double conjugate_tolerance = 1e-12;

double singular_threshold(const Matrix& basis) {
  double scale = 1.0;
  for (int j = 0; j < basis.cols(); ++j) scale *= basis.col(j).norm();
  return 1e-14 * scale;
}

}  // namespace

void validate(const ModelManifold& m) {
  std::visit(
      [](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, FlatTorus2>) {
          if (!(std::fabs(v.basis.determinant()) > singular_threshold(v.basis)))
            fail(ErrorKind::domain, "flat torus basis is singular");
        } else if constexpr (std::is_same_v<T, SquareTorus>) {
          if (v.n < 1) fail(ErrorKind::domain, "square torus dimension must be >= 1");
        } else if constexpr (std::is_same_v<T, Sphere>) {
          if (v.n < 2) fail(ErrorKind::domain, "sphere dimension must be >= 2");
        } else if constexpr (std::is_same_v<T, Euclidean>) {
          if (v.n < 1) fail(ErrorKind::domain, "Euclidean dimension must be >= 1");
        }
      },
      m);
}

int dimension(const ModelManifold& m) {
  return std::visit(
      [](const auto& v) -> int {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Circle>) return 1;
        else if constexpr (std::is_same_v<T, FlatTorus2>) return 2;
        else return v.n;
      },
      m);
}

double volume(const ModelManifold& m) {
  return std::visit(
      [](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Circle>) return two_pi;
        else if constexpr (std::is_same_v<T, FlatTorus2>) return std::fabs(v.basis.determinant());
        else if constexpr (std::is_same_v<T, SquareTorus>) return std::pow(two_pi, v.n);
        else if constexpr (std::is_same_v<T, Sphere>) {
          // D_n = 2 pi^{(n+1)/2} / Gamma((n+1)/2)
          return 2.0 * std::pow(pi, 0.5 * (v.n + 1)) / std::tgamma(0.5 * (v.n + 1));
        } else return std::numeric_limits<double>::infinity();
      },
      m);
}

bool is_torus(const ModelManifold& m) {
  return std::holds_alternative<Circle>(m) || std::holds_alternative<FlatTorus2>(m) ||
         std::holds_alternative<SquareTorus>(m);
}

std::string describe(const ModelManifold& m) {
  std::ostringstream os;
  os.precision(17);
  std::visit(
      [&os](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Circle>) os << "circle";
        else if constexpr (std::is_same_v<T, FlatTorus2>)
          os << "flat_torus2[" << v.basis(0, 0) << "," << v.basis(1, 0) << ";" << v.basis(0, 1)
             << "," << v.basis(1, 1) << "]";
        else if constexpr (std::is_same_v<T, SquareTorus>) os << "square_torus" << v.n;
        else if constexpr (std::is_same_v<T, Sphere>) os << "sphere" << v.n;
        else os << "euclidean" << v.n;
      },
      m);
  return os.str();
}

Lattice::Lattice(Matrix basis, Matrix dual_basis)
    : basis_(std::move(basis)), dual_basis_(std::move(dual_basis)) {
  volume_ = std::fabs(basis_.determinant());
  orthogonal_ = true;
  for (int i = 0; i < basis_.cols(); ++i)
    for (int j = i + 1; j < basis_.cols(); ++j)
      if (basis_.col(i).dot(basis_.col(j)) != 0.0) orthogonal_ = false;
}

Lattice dual_lattice(const Matrix& basis) {
  if (basis.rows() != basis.cols() || basis.rows() == 0)
    fail(ErrorKind::domain, "lattice basis must be a nonempty square matrix");
  if (!(std::fabs(basis.determinant()) > singular_threshold(basis)))
    fail(ErrorKind::domain, "lattice basis is singular");
  return Lattice(basis, basis.inverse().transpose());
}

Lattice torus_lattice(const ModelManifold& m) {
  validate(m);
  if (std::holds_alternative<Circle>(m)) return dual_lattice(Matrix::Constant(1, 1, two_pi));
  if (const auto* t = std::get_if<SquareTorus>(&m))
    return dual_lattice(two_pi * Matrix::Identity(t->n, t->n));
  if (const auto* f = std::get_if<FlatTorus2>(&m)) return dual_lattice(Matrix(f->basis));
  fail(ErrorKind::domain, "manifold is not a torus: " + describe(m));
}

double unit_ball_volume(int n) {
  return std::pow(pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0);
}

double estimated_ball_count(const Lattice& lattice, double radius) {
  const int n = lattice.dimension();
  double diam = 0.0;
  for (int j = 0; j < n; ++j) diam += lattice.basis().col(j).norm();
  return unit_ball_volume(n) * std::pow(radius + diam, n) / lattice.volume();
}

std::vector<LatticePoint> enumerate_lattice_points(const Lattice& lattice, double radius,
                                                   std::size_t cap) {
  if (!(radius >= 0.0)) fail(ErrorKind::domain, "enumeration radius must be nonnegative");
  const int n = lattice.dimension();
  const double estimate =
      unit_ball_volume(n) * std::pow(radius, n) / lattice.volume();
  if (estimate > static_cast<double>(cap))
    fail(ErrorKind::capacity, "lattice enumeration would exceed the cap of " +
                                  std::to_string(cap) + " points");
  std::vector<LatticePoint> out;
  const Vector zero = Vector::Zero(n);
  for_each_lattice_point(lattice.basis(), zero, 0.0, radius * radius, true,
                         [&](std::span<const std::int64_t> k, double norm2) {
                           if (out.size() >= cap)
                             fail(ErrorKind::capacity,
                                  "lattice enumeration exceeded the cap of " +
                                      std::to_string(cap) + " points");
                           LatticePoint p;
                           p.index.assign(k.begin(), k.end());
                           p.point = Vector::Zero(n);
                           for (int i = 0; i < n; ++i)
                             p.point += static_cast<double>(k[i]) * lattice.basis().col(i);
                           p.norm = std::sqrt(norm2);
                           out.push_back(std::move(p));
                         });
  return out;
}

GeodesicSegment::GeodesicSegment(double length, int morse_index, double jacobi_det)
    : length_(length), morse_index_(morse_index), jacobi_det_(jacobi_det) {
  if (!(length > 0.0)) fail(ErrorKind::conjugate, "geodesic segment length must be positive");
  if (morse_index < 0) fail(ErrorKind::domain, "Morse index must be nonnegative");
  if (!(jacobi_det > 0.0))
    fail(ErrorKind::conjugate, "Jacobi determinant vanishes: endpoints are conjugate");
}

std::vector<GeodesicSegment> geodesics_torus(const Lattice& lattice, const Vector& displacement,
                                             double max_length) {
  const int n = lattice.dimension();
  if (displacement.size() != n) fail(ErrorKind::domain, "displacement has the wrong dimension");
  const double dist = torus_distance(lattice, displacement);
  if (dist < conjugate_tolerance)
    fail(ErrorKind::conjugate, "displacement lies in the lattice: endpoints coincide on the torus");
  struct Item {
    double length;
    std::size_t order;
  };
  std::vector<Item> items;
  for_each_lattice_point(lattice.basis(), displacement, 0.0, max_length * max_length, true,
                         [&](std::span<const std::int64_t>, double norm2) {
                           items.push_back({std::sqrt(norm2), items.size()});
                         });
  std::stable_sort(items.begin(), items.end(),
                   [](const Item& a, const Item& b) { return a.length < b.length; });
  std::vector<GeodesicSegment> out;
  out.reserve(items.size());
  for (const auto& it : items) out.emplace_back(it.length, 0, std::pow(it.length, n - 1));
  return out;
}

std::vector<GeodesicSegment> geodesics_sphere(int n, double s, int max_count) {
  if (n < 2) fail(ErrorKind::domain, "sphere dimension must be >= 2");
  if (max_count < 0) fail(ErrorKind::domain, "segment count must be nonnegative");
  if (!(s > conjugate_tolerance && s < pi - conjugate_tolerance))
    fail(ErrorKind::conjugate, "sphere angle must lie strictly inside (0, pi)");
  const double jacobi = std::pow(std::sin(s), n - 1);
  std::vector<GeodesicSegment> out;
  out.emplace_back(s, 0, jacobi);
  for (long k = 1; k <= max_count; ++k) {
    for (long signed_k : {-k, k}) {
      const double length = std::fabs(s + two_pi * static_cast<double>(signed_k));
      const int morse = (n - 1) * (2 * static_cast<int>(k) - reversed_heaviside(signed_k));
      out.emplace_back(length, morse, jacobi);
    }
  }
  return out;
}

double torus_distance(const Lattice& lattice, const Vector& displacement) {
  const int n = lattice.dimension();
  if (displacement.size() != n) fail(ErrorKind::domain, "displacement has the wrong dimension");
  const Matrix inv = lattice.basis().inverse();
  Vector u = inv * displacement;
  for (int i = 0; i < n; ++i) u[i] -= std::floor(u[i] + 0.5);
  if (lattice.orthogonal()) {
    // Min image independently per axis.
    double d2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double c = u[i] * lattice.basis().col(i).norm();
      d2 += c * c;
    }
    return std::sqrt(d2);
  }
  const Vector reduced = lattice.basis() * u;
  const double r = reduced.norm();
  // Any minimizer eta has |u + eta|_inf <= ||B^{-1}|| r.
  const double op_norm = inv.operatorNorm();
  const auto m = static_cast<std::int64_t>(std::ceil(2.0 * r * op_norm)) + 1;
  double best2 = r * r;
  std::vector<std::int64_t> k(n, -m);
  for (;;) {
    Vector v = reduced;
    for (int i = 0; i < n; ++i) v += static_cast<double>(k[i]) * lattice.basis().col(i);
    best2 = std::min(best2, v.squaredNorm());
    int i = n - 1;
    while (i >= 0) {
      if (++k[i] <= m) break;
      k[i] = -m;
      --i;
    }
    if (i < 0) break;
  }
  return std::sqrt(best2);
}

PointPair make_torus_pair(const ModelManifold& m, const Vector& displacement) {
  const Lattice lattice = torus_lattice(m);
  PointPair p{m, displacement, 0.0, torus_distance(lattice, displacement)};
  return p;
}

PointPair make_circle_pair(double d) {
  return make_torus_pair(Circle{}, Vector::Constant(1, d));
}

PointPair make_sphere_pair(int n, double s) {
  if (n < 2) fail(ErrorKind::domain, "sphere dimension must be >= 2");
  if (!(s >= 0.0 && s <= pi)) fail(ErrorKind::domain, "sphere angle must lie in [0, pi]");
  return PointPair{Sphere{n}, Vector(), s, s};
}

PointPair make_euclidean_pair(int n, double d) {
  if (n < 1) fail(ErrorKind::domain, "Euclidean dimension must be >= 1");
  if (!(d >= 0.0)) fail(ErrorKind::domain, "distance must be nonnegative");
  return PointPair{Euclidean{n}, Vector(), 0.0, d};
}

}  // namespace sflab::geometry
