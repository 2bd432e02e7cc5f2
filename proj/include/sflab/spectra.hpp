#pragma once

// Exact spectral functions N_{x,y}(lambda) on the model manifolds and the
// Euclidean comparison term.

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "sflab/geometry.hpp"

namespace sflab::spectra {

/// One distinct frequency with the eigenspace sum of phi_j(x) phi_j(y).
struct SpectralAtom {
  double frequency = 0.0;
  double coefficient = 0.0;
};

/// Bound N_{x,x}(lambda) <= scale * (lambda + shift)^dimension for the
/// diagonal counting function of the same manifold.
struct DiagonalEnvelope {
  double scale = 0.0;
  double shift = 0.0;
};

struct SeriesOptions {
  bool include_zero_mode = false;
  std::size_t cap = std::size_t{1} << 28;  // lattice points
};

/// Frequencies within this relative distance of lambda count as equal to it
/// (and so are excluded from N(lambda)); absorbs rounding in lattice norms.
inline constexpr double frequency_tie_tolerance = 1e-12;

class SpectralSeries {
 public:
  SpectralSeries() = default;
  SpectralSeries(int dimension, std::vector<SpectralAtom> atoms, double cutoff, bool include_zero_mode,
                 DiagonalEnvelope envelope, std::string provenance);

  int dimension() const noexcept { return dimension_; }
  const std::vector<SpectralAtom>& atoms() const noexcept { return atoms_; }
  double cutoff() const noexcept { return cutoff_; }
  bool include_zero_mode() const noexcept { return include_zero_mode_; }
  const DiagonalEnvelope& envelope() const noexcept { return envelope_; }
  const std::string& provenance() const noexcept { return provenance_; }

  /// Number of atoms with frequency < lambda, up to the tie tolerance.
  std::size_t count_below(double lambda) const;
  /// Value of N after the first `count` atoms (compensated, ascending order).
  double partial_sum(std::size_t count) const;

 private:
  int dimension_ = 0;
  std::vector<SpectralAtom> atoms_;
  std::vector<double> prefix_;  // prefix_[j] = sum of atoms [0, j)
  double cutoff_ = 0.0;
  bool include_zero_mode_ = false;
  DiagonalEnvelope envelope_;
  std::string provenance_;
};

SpectralSeries build_series_torus(const geometry::Lattice& lattice, const geometry::Vector& displacement,
                                  double cutoff, const SeriesOptions& options = {});
SpectralSeries build_series_circle(double d, double cutoff, const SeriesOptions& options = {});
SpectralSeries build_series_sphere(int n, double s, double cutoff, const SeriesOptions& options = {});
/// Dispatch on the manifold of a point pair.
SpectralSeries build_series(const geometry::PointPair& pair, double cutoff, const SeriesOptions& options = {});

/// N(lambda) = sum of coefficients with frequency < lambda. Throws a cutoff
/// error for lambda beyond the series cutoff.
double evaluate_N(const SpectralSeries& series, double lambda);

struct RescaledValue {
  double lambda = 0.0;
  double value = 0.0;
};
/// lambda^{(1-n)/2} N(lambda).
RescaledValue evaluate_rescaled(const SpectralSeries& series, double lambda);

/// Closed form on the unit circle, zero mode excluded.
double spectral_function_circle(double d, double lambda);

/// (2 pi)^{-n/2} d^{-n/2} lambda^{n/2} J_{n/2}(d lambda), d > 0.
double euclidean_N(int n, double d, double lambda);
/// Same, continued to d = 0 by the Weyl term.
double euclidean_N_regular(int n, double d, double lambda);
/// Leading sine term of the large-argument expansion, needs d lambda >= 1.
double euclidean_N_asymptotic(int n, double d, double lambda);

/// lambda^n / ((4 pi)^{n/2} Gamma(n/2 + 1)).
double weyl_leading(int n, double lambda);

/// Darboux main term for N_s(sqrt(m(m+n-1))) on S^n (zero mode included).
double sphere_darboux_main(int n, double s, int m);

/// Columnar text export: a commented header then "frequency,coefficient" rows.
void write_series(std::ostream& out, const SpectralSeries& series);

}  // namespace sflab::spectra
