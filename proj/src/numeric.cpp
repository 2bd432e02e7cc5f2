#include "sflab/numeric.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <thread>
#include <utility>

#include "sflab/error.hpp"

namespace sflab {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::domain: return "domain";
    case ErrorKind::capacity: return "capacity";
    case ErrorKind::conjugate: return "conjugate";
    case ErrorKind::cutoff: return "cutoff";
    case ErrorKind::regime: return "regime";
    case ErrorKind::resolution: return "resolution";
    case ErrorKind::non_finite: return "non-finite";
    case ErrorKind::config: return "config";
  }
  return "unknown";
}

double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t block = 128;
  if (values.size() <= block) {
    CompensatedSum acc;
    for (double v : values) acc.add(v);
    return acc.value();
  }
  const std::size_t half = values.size() / 2;
  CompensatedSum acc;
  acc.add(pairwise_sum(values.first(half)));
  acc.add(pairwise_sum(values.subspan(half)));
  return acc.value();
}

namespace {

// Legendre P_n and P_{n-1} at x.
std::pair<double, double> legendre_pair(std::size_t order, double x) {
  double p0 = 1.0;
  double p1 = x;
  for (std::size_t k = 2; k <= order; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
    p0 = p1;
    p1 = p2;
  }
  return {p1, p0};
}

GaussRule compute_gauss_legendre(std::size_t order) {
  GaussRule rule;
  rule.nodes.assign(order, 0.0);
  rule.weights.assign(order, 0.0);
  if (order == 1) {
    rule.weights[0] = 2.0;
    return rule;
  }
  const double n = static_cast<double>(order);
  for (std::size_t i = 0; i < (order + 1) / 2; ++i) {
    double x = std::cos(pi * (static_cast<double>(i) + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int iter = 0; iter < 100; ++iter) {
      const auto [pn, pnm1] = legendre_pair(order, x);
      dp = n * (x * pn - pnm1) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-16) break;
    }
    const auto [pn, pnm1] = legendre_pair(order, x);
    dp = n * (x * pn - pnm1) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[order - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[order - 1 - i] = w;
  }
  if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
  return rule;
}

}  // namespace

const GaussRule& gauss_legendre(std::size_t order) {
  if (order == 0) fail(ErrorKind::domain, "Gauss-Legendre order must be positive");
  static std::mutex mutex;
  static std::map<std::size_t, std::unique_ptr<GaussRule>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[order];
  if (!slot) slot = std::make_unique<GaussRule>(compute_gauss_legendre(order));
  return *slot;
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorKind::domain, "fit_line: length mismatch");
  LinearFit fit;
  fit.count = x.size();
  if (x.size() < 2) fail(ErrorKind::domain, "fit_line: need at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0) fail(ErrorKind::domain, "fit_line: abscissae are all equal");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    ssr += r * r;
  }
  fit.rms_residual = std::sqrt(ssr / n);
  fit.r_squared = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  fit.slope_stderr = x.size() > 2 ? std::sqrt(ssr / (n - 2.0) / sxx) : 0.0;
  return fit;
}

LinearFit fit_log_log(std::span<const double> x, std::span<const double> y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (x[i] > 0.0 && y[i] > 0.0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  }
  return fit_line(lx, ly);
}

std::vector<double> linspace(double start, double stop, std::size_t count) {
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = start;
    return out;
  }
  for (std::size_t i = 0; i < count; ++i)
    out[i] = start + (stop - start) * static_cast<double>(i) / static_cast<double>(count - 1);
  if (count > 1) out.back() = stop;
  return out;
}

std::vector<double> logspace(double start, double stop, std::size_t count) {
  if (start <= 0.0 || stop <= 0.0) fail(ErrorKind::domain, "logspace: bounds must be positive");
  std::vector<double> out = linspace(std::log(start), std::log(stop), count);
  for (double& v : out) v = std::exp(v);
  if (!out.empty()) {
    out.front() = start;
    out.back() = stop;
  }
  return out;
}

namespace {
std::atomic<unsigned> g_threads{1};
}

void set_thread_count(unsigned threads) { g_threads = std::max(1u, threads); }
unsigned thread_count() { return g_threads; }

namespace detail {

void run_parallel(std::size_t count, void* ctx, void (*body)(void*, std::size_t)) {
  const unsigned threads = static_cast<unsigned>(
      std::min<std::size_t>(g_threads.load(), std::max<std::size_t>(count, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(ctx, i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::size_t error_index = count;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(ctx, i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

}  // namespace sflab
