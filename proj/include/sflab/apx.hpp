#pragma once

// Almost-periodic expansions built from geodesic data, Besicovitch
// seminorm estimates and B^2 residuals against spectral functions.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sflab/geometry.hpp"
#include "sflab/spectra.hpp"

namespace sflab::apx {

/// amplitude * sin(frequency * lambda + phase)
struct TrigTerm {
  double amplitude = 0.0;
  double frequency = 0.0;
  double phase = 0.0;
};

struct ApExpansion {
  std::vector<TrigTerm> terms;  // ascending frequency
  double cutoff = 0.0;          // every frequency <= cutoff
  double constant = 0.0;        // non-oscillating offset (circle: -1/(2 pi))
  std::string provenance;

  double max_frequency() const { return terms.empty() ? 0.0 : terms.back().frequency; }
};

/// One term per segment: amplitude 2 / ((2 pi)^{(n+1)/2} l sqrt(a)),
/// frequency l, phase -(n-1) pi/4 - omega pi/2. Segments longer than Q drop out.
ApExpansion expansion_from_geodesics(std::span<const geometry::GeodesicSegment> segments, int n, double Q);

ApExpansion torus_expansion(const geometry::Lattice& lattice, const geometry::Vector& displacement, double Q);
/// k = 0, +-1, ..., +-K on S^n.
ApExpansion sphere_expansion(int n, double s, int K);
/// Circle, lengths |d + 2 pi k| <= Q; `with_constant` adds the -1/(2 pi) offset.
ApExpansion circle_expansion(double d, double Q, bool with_constant);
/// Expansion for the spectral function of any model pair.
ApExpansion expansion_for_pair(const geometry::PointPair& pair, double Q);

double eval_expansion(const ApExpansion& e, double lambda);

/// -(n - 1 + 2 omega_k) pi / 4 with omega_k = (n-1)(2|k| - H(k)).
double morse_phase_check(int n, long k);

struct SeminormEstimate {
  double p = 0.0;
  double T = 0.0;
  double value = 0.0;
  double samples_per_unit = 0.0;
  std::vector<double> history_T;  // T/4, T/2, T
  std::vector<double> history;
};

/// ((1/T) int_0^T |f|^p)^{1/p} by the composite midpoint rule. When
/// `max_frequency` is positive the sampling density must be at least
/// 8 max_frequency / (2 pi) per unit length.
SeminormEstimate besicovitch_seminorm(const std::function<double(double)>& f, double p, double T,
                                      double samples_per_unit, double max_frequency = 0.0);

/// Target mu^power * level(mu), where level is values[j] on the j-th gap of
/// the increasing breakpoint list (values.size() == breaks.size() + 1, the
/// value at a breakpoint belongs to the gap on its left).
struct PiecewiseTarget {
  std::vector<double> breaks;
  std::vector<double> values;
  double power = 0.0;
};

PiecewiseTarget rescaled_target(const spectra::SpectralSeries& series);

/// (1/T) int_lower^T |target - e|^2 for each T in the ascending list, in one
/// pass. Panels split at every breakpoint and are refined against the
/// highest expansion frequency.
std::vector<double> residual_history(const PiecewiseTarget& target, const ApExpansion& e,
                                     std::span<const double> horizons, double lower = 1.0);

/// (1/T) int_1^T |N~ - e|^2. T beyond the series cutoff is a cutoff error.
double b2_residual(const spectra::SpectralSeries& series, const ApExpansion& e, double T);
std::vector<double> b2_residual_history(const spectra::SpectralSeries& series, const ApExpansion& e,
                                        std::span<const double> horizons);

/// Circle kernels and their expansions in B^2, 0 < s < pi:
///   sin_floor:  sin((floor(l) + 1/2) s) / (2 sin(s/2))
///   sin_round:  sin(floor(l + 1/2) s) / (2 sin(s/2))
///   cos_floor:  cos((floor(l) + 1/2) s) / (2 sin(s/2))
///   cos_round:  cos(floor(l + 1/2) s) / (2 sin(s/2))
enum class CircleKernel { sin_floor, sin_round, cos_floor, cos_round };
PiecewiseTarget circle_kernel_target(CircleKernel kind, double s, double T);
ApExpansion circle_kernel_expansion(CircleKernel kind, double s, int K);

/// sum_{|k| <= K} 4 / (s + 2 pi k)^2, converging to 1 / sin^2(s/2).
double inverse_sin2_partial(double s, long K);

}  // namespace sflab::apx
