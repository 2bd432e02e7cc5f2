#pragma once

// Pointwise zeta function Z_{x,y}(z) = sum_j lambda_j^{-z} phi_j(x) phi_j(y)
// with certified truncation errors, and growth scans along vertical lines.

#include <complex>
#include <span>
#include <string>
#include <vector>

#include "sflab/harness.hpp"
#include "sflab/spectra.hpp"

namespace sflab::zeta {

using complex = std::complex<double>;

struct ZetaPoint {
  double t = 0.0;
  double s = 0.0;
  complex value;
  double tail_bound = 0.0;  // truncation plus rounding allowance
  double cutoff = 0.0;      // direct: frequencies < cutoff summed; accelerated: terms summed
  std::string method;
};

inline constexpr double default_margin = 0.25;

/// Bound on sum_{lambda_j >= Lambda} |c_j| lambda_j^{-t} from the diagonal
/// envelope: t A (1 + rho/Lambda)^n Lambda^{n-t} / (t - n), for t > n.
double direct_tail_bound(const spectra::SpectralSeries& series, double t, double Lambda);

/// Absolutely convergent sum for Re z > n + margin over the whole series.
/// Throws a regime error for smaller Re z and a cutoff error when the tail
/// bound at the series cutoff exceeds tol.
ZetaPoint zeta_direct(const spectra::SpectralSeries& series, complex z, double tol = 1e-10,
                      double margin = default_margin);

/// Sum over frequencies below Lambda with the same certified bound, Re z > n.
ZetaPoint zeta_partial(const spectra::SpectralSeries& series, complex z, double Lambda);

/// (1/pi) sum_{m >= 1} cos(m d) m^{-z} on the unit circle for Re z > 0:
/// a direct head followed by p summations by parts of the tail against the
/// geometric kernel, with the remainder bound
/// |c|^p |(z)_p| M^{1-t-p} / (t+p-1), c = w / (1 - w), w = e^{id}.
ZetaPoint zeta_accelerated_circle(double d, complex z, double tol = 1e-10);

struct ZetaScan {
  double t = 0.0;
  std::vector<double> s_grid;
  std::vector<ZetaPoint> values;
  LinearFit fit;                     // log|Z| against log <s> over |s| in [s_min, s_max]
  double s_min = 10.0;
  double predicted_exponent = 0.0;   // NaN where no prediction is checked
  bool checked = false;
  double tolerance = 0.1;
};

/// Predicted growth exponent of |Z(t + is)| in <s>: 0 for t > n, n - t for
/// n/2 < t < n. The lines t = n and t = n/2 and the range t < n/2 have none.
double predicted_growth_exponent(int n, double t, bool& has_prediction);

ZetaScan zeta_growth_scan(const spectra::SpectralSeries& series, double t, std::span<const double> s_grid,
                          double tol = 1e-10);
ZetaScan zeta_growth_scan_circle(double d, double t, std::span<const double> s_grid, double tol = 1e-10);

harness::ScanReport to_report(const ZetaScan& scan, const std::string& scan_id);

struct MellinResult {
  complex direct;
  complex mellin;
  double residual = 0.0;
  double bound = 0.0;  // direct tail bound plus the tail bound beyond lambda_cap
};

/// Compares zeta_direct with z int_0^{lambda_cap} lambda^{-z-1} N(lambda) dlambda
/// plus N(lambda_cap) lambda_cap^{-z}, integrated gap by gap.
MellinResult mellin_consistency(const spectra::SpectralSeries& series, complex z, double lambda_cap,
                                double tol = 1e-10);

/// int_M |Z_{x,y}(t + is)|^2 / (d^{2t-n-eps} + 1) dy for each s, t > n. Tori:
/// frequencies below the grid Nyquist band through the FFT; spheres: the
/// Legendre series up to `sphere_cutoff`. values["l2_tail_bound"] bounds the
/// L^2(dy) norm of the omitted tail.
harness::ScanReport zeta_manifold_average(const harness::QuadratureRule& rule, double t,
                                          std::span<const double> s_grid, double eps = 0.1,
                                          double sphere_cutoff = 2000.0);

}  // namespace sflab::zeta
