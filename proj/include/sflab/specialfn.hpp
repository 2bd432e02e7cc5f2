#pragma once

// Bessel J of real order, Mueller-Legendre polynomials and sphere constants.

#include <cstdint>
#include <vector>

namespace sflab::specialfn {

/// J_alpha(x) for alpha >= 0, x >= 0. Absolute error about 1e-10 or better
/// for x <= 1e4, alpha <= 25.
double bessel_j(double alpha, double x);

/// Degree-m Mueller-Legendre polynomial on S^n, normalized by P_m(n,1) = 1.
double legendre_muller(int n, int m, double t);

/// P_0(n,t), ..., P_{m_max}(n,t) from the same recurrence.
std::vector<double> legendre_muller_table(int n, int m_max, double t);

/// Dimension of the degree-m eigenspace on S^n, exact.
std::uint64_t multiplicity(int n, int m);

/// Area of the unit n-sphere, D_n = 2 pi^{(n+1)/2} / Gamma((n+1)/2).
double sphere_area_constant(int n);

/// Taylor coefficients c_0..c_{m_max} of (1+z) / (D_n (1+z^2-2zt)^{(n+1)/2}).
/// c_m is the diagonal-inclusive partial sum of N(n,m') P_{m'}(n,t) / D_n.
std::vector<double> generating_function_coeffs(int n, double t, int m_max);

}  // namespace sflab::specialfn
