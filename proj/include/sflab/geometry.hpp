#pragma once

// Model manifolds, lattices and geodesic segments joining two points.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace sflab::geometry {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Unit circle R / 2piZ.
struct Circle {};
/// R^2 / Gamma, columns of `basis` generate Gamma.
struct FlatTorus2 {
  Eigen::Matrix2d basis;
};
/// R^n / (2piZ)^n.
struct SquareTorus {
  int n = 2;
};
/// Unit round sphere S^n, n >= 2.
struct Sphere {
  int n = 2;
};
/// Flat R^n.
struct Euclidean {
  int n = 2;
};

using ModelManifold = std::variant<Circle, FlatTorus2, SquareTorus, Sphere, Euclidean>;

/// Throws domain errors for invalid parameters (singular basis, bad dimension).
void validate(const ModelManifold& m);
int dimension(const ModelManifold& m);
/// Riemannian volume; infinity for Euclidean space.
double volume(const ModelManifold& m);
bool is_torus(const ModelManifold& m);
std::string describe(const ModelManifold& m);

class Lattice {
 public:
  Lattice() = default;
  Lattice(Matrix basis, Matrix dual_basis);

  const Matrix& basis() const noexcept { return basis_; }
  const Matrix& dual_basis() const noexcept { return dual_basis_; }
  /// |det basis|, the volume of the fundamental domain.
  double volume() const noexcept { return volume_; }
  int dimension() const noexcept { return static_cast<int>(basis_.rows()); }
  /// The dual lattice with the roles of the two bases exchanged.
  Lattice dual() const { return Lattice(dual_basis_, basis_); }
  /// True when the basis columns are mutually orthogonal.
  bool orthogonal() const noexcept { return orthogonal_; }

 private:
  Matrix basis_;
  Matrix dual_basis_;
  double volume_ = 0.0;
  bool orthogonal_ = false;
};

/// Lattice generated by the columns of `basis` together with its dual
/// Gamma* = { xi : <xi, eta> in Z for all eta in Gamma } = basis^{-T} Z^n.
Lattice dual_lattice(const Matrix& basis);

/// Lattice of a torus manifold (Circle, FlatTorus2, SquareTorus).
Lattice torus_lattice(const ModelManifold& m);

inline constexpr std::size_t default_enumeration_cap = std::size_t{1} << 26;

struct LatticePoint {
  std::vector<std::int64_t> index;  // integer coordinates in the basis
  Vector point;
  double norm = 0.0;
};

/// Every lattice vector with |xi| <= radius, lexicographic in `index`.
std::vector<LatticePoint> enumerate_lattice_points(const Lattice& lattice, double radius,
                                                   std::size_t cap = default_enumeration_cap);

/// Visits integer vectors k, in lexicographic order, with
/// lo2 <= |basis k + offset|^2 < hi2 (or <= hi2 when `inclusive` is set).
/// The callback receives the index and the squared norm.
template <class Fn>
void for_each_lattice_point(const Matrix& basis, const Vector& offset, double lo2, double hi2,
                            bool inclusive, Fn&& fn);

/// Count of lattice vectors that `for_each_lattice_point` would visit for a ball,
/// estimated from the volume; used to enforce capacity caps before enumerating.
double estimated_ball_count(const Lattice& lattice, double radius);

/// Volume of the unit ball in R^n.
double unit_ball_volume(int n);

class GeodesicSegment {
 public:
  /// Rejects non-positive length or Jacobi determinant (conjugate endpoints).
  GeodesicSegment(double length, int morse_index, double jacobi_det);

  double length() const noexcept { return length_; }
  int morse_index() const noexcept { return morse_index_; }
  double jacobi_det() const noexcept { return jacobi_det_; }

 private:
  double length_;
  int morse_index_;
  double jacobi_det_;
};

/// Segments of length <= max_length joining y to x on R^n / Gamma, one per
/// eta in Gamma (equal lengths kept as separate entries), sorted by length.
std::vector<GeodesicSegment> geodesics_torus(const Lattice& lattice, const Vector& displacement,
                                             double max_length);

/// Segments k = 0, -1, 1, ..., -K, K on the unit n-sphere for points at
/// angle s: length |s + 2 pi k|, Morse index (n-1)(2|k| - H(k)).
std::vector<GeodesicSegment> geodesics_sphere(int n, double s, int max_count);

/// Reversed Heaviside function: 1 for k < 0, else 0.
inline int reversed_heaviside(long k) { return k < 0 ? 1 : 0; }

/// min over eta in Gamma of |displacement + eta|.
double torus_distance(const Lattice& lattice, const Vector& displacement);

/// A pair of points on a model manifold, reduced to the data every
/// evaluator needs.
struct PointPair {
  ModelManifold manifold;
  Vector displacement;  // x - y for tori (ambient coordinates)
  double angle = 0.0;   // sphere angle s
  double distance = 0.0;
};

PointPair make_torus_pair(const ModelManifold& m, const Vector& displacement);
PointPair make_circle_pair(double d);
PointPair make_sphere_pair(int n, double s);
PointPair make_euclidean_pair(int n, double d);

// ---------------------------------------------------------------------------

template <class Fn>
void for_each_lattice_point(const Matrix& basis, const Vector& offset, double lo2, double hi2,
                            bool inclusive, Fn&& fn) {
  const int n = static_cast<int>(basis.rows());
  if (hi2 < 0.0) return;
  const double radius = std::sqrt(hi2);
  const Matrix inv = basis.inverse();
  // Bounding box for the leading n-1 coordinates: k = B^{-1}(v - offset).
  const Vector center = -(inv * offset);
  std::vector<std::int64_t> lo(n), hi(n);
  for (int i = 0; i < n; ++i) {
    const double reach = radius * inv.row(i).norm();
    lo[i] = static_cast<std::int64_t>(std::floor(center[i] - reach)) - 1;
    hi[i] = static_cast<std::int64_t>(std::ceil(center[i] + reach)) + 1;
  }
  const Vector last = basis.col(n - 1);
  const double a = last.squaredNorm();
  std::vector<std::int64_t> k(n);
  for (int i = 0; i < n - 1; ++i) k[i] = lo[i];
  Vector partial(n);
  auto visit_range = [&](std::int64_t from, std::int64_t to) {
    for (std::int64_t j = from; j <= to; ++j) {
      k[n - 1] = j;
      const double jd = static_cast<double>(j);
      double norm2 = 0.0;
      for (int d = 0; d < n; ++d) {
        const double v = partial[d] + jd * last[d];
        norm2 += v * v;
      }
      if (norm2 < lo2) continue;
      if (inclusive ? norm2 > hi2 : norm2 >= hi2) continue;
      fn(std::span<const std::int64_t>(k), norm2);
    }
  };
  for (;;) {
    partial = offset;
    for (int i = 0; i < n - 1; ++i) partial += static_cast<double>(k[i]) * basis.col(i);
    // |partial + j last|^2 <= r^2 is a quadratic inequality in j.
    const double b = partial.dot(last);
    const double c = partial.squaredNorm();
    const double disc_out = b * b - a * (c - hi2);
    if (disc_out >= 0.0) {
      const double root = std::sqrt(disc_out);
      const auto j_lo = static_cast<std::int64_t>(std::floor((-b - root) / a)) - 1;
      const auto j_hi = static_cast<std::int64_t>(std::ceil((-b + root) / a)) + 1;
      const double disc_in = b * b - a * (c - lo2);
      if (lo2 > 0.0 && disc_in > 0.0) {
        const double root_in = std::sqrt(disc_in);
        // Excluded open interval (inner ball), padded conservatively.
        const auto e_lo = static_cast<std::int64_t>(std::ceil((-b - root_in) / a)) + 1;
        const auto e_hi = static_cast<std::int64_t>(std::floor((-b + root_in) / a)) - 1;
        if (e_lo <= e_hi) {
          visit_range(j_lo, std::min(j_hi, e_lo - 1));
          visit_range(std::max(j_lo, e_hi + 1), j_hi);
        } else {
          visit_range(j_lo, j_hi);
        }
      } else {
        visit_range(j_lo, j_hi);
      }
    }
    int i = n - 2;
    while (i >= 0) {
      if (++k[i] <= hi[i]) break;
      k[i] = lo[i];
      --i;
    }
    if (i < 0) break;
  }
}

}  // namespace sflab::geometry
