#pragma once

// Summation, quadrature nodes, regression fits and the deterministic
// parallel map shared by every module.

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <type_traits>
#include <vector>

namespace sflab {

inline constexpr double pi = 3.141592653589793238462643383279502884;
inline constexpr double two_pi = 2.0 * pi;

/// Neumaier-compensated running sum. Order of `add` calls fixes the result.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) noexcept {
    add(x);
    return *this;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

class CompensatedComplexSum {
 public:
  void add(std::complex<double> z) noexcept {
    re_.add(z.real());
    im_.add(z.imag());
  }
  std::complex<double> value() const noexcept { return {re_.value(), im_.value()}; }

 private:
  CompensatedSum re_;
  CompensatedSum im_;
};

/// Pairwise reduction over fixed-size compensated blocks; the tree shape
/// depends only on the length of the input.
double pairwise_sum(std::span<const double> values);

/// Gauss-Legendre rule on [-1, 1]. Results are cached per order.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussRule& gauss_legendre(std::size_t order);

/// Ordinary least squares y = intercept + slope * x.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double rms_residual = 0.0;
  double r_squared = 0.0;
  std::size_t count = 0;
};
LinearFit fit_line(std::span<const double> x, std::span<const double> y);

/// Least-squares exponent of y ~ x^slope; entries with y <= 0 are skipped.
LinearFit fit_log_log(std::span<const double> x, std::span<const double> y);

std::vector<double> linspace(double start, double stop, std::size_t count);
std::vector<double> logspace(double start, double stop, std::size_t count);

// Deterministic parallel map. Work items are pure functions of their index
// and write to their own slot, so output never depends on the thread count.
void set_thread_count(unsigned threads);
unsigned thread_count();

namespace detail {
void run_parallel(std::size_t count, void* ctx, void (*body)(void*, std::size_t));
}

template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  using F = std::remove_reference_t<Fn>;
  auto body = [](void* ctx, std::size_t i) { (*static_cast<F*>(ctx))(i); };
  detail::run_parallel(count, const_cast<std::remove_const_t<F>*>(&fn), body);
}

}  // namespace sflab
