#include "sqrtdiff/numerics.hpp"
#include "sqrtdiff/error.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <random>
#include <string>
#include <thread>

namespace sqrtdiff::numerics {

namespace {

double pairwise_sum_impl(const double* first, std::size_t n)
{
  if (n <= 16) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      s += first[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_impl(first, half) +
         pairwise_sum_impl(first + half, n - half);
}

} // namespace

double pairwise_sum(std::span<const double> values)
{
  return pairwise_sum_impl(values.data(), values.size());
}

double mean(std::span<const double> values)
{
  if (values.empty())
    return 0.0;
  return pairwise_sum(values) / static_cast<double>(values.size());
}

double sample_std(std::span<const double> values)
{
  const std::size_t n = values.size();
  if (n < 2)
    return 0.0;
  const double m = mean(values);
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i)
    sq[i] = (values[i] - m) * (values[i] - m);
  return std::sqrt(pairwise_sum(sq) / static_cast<double>(n - 1));
}

double quantile(std::vector<double> values, double prob)
{
  if (values.empty())
    throw Error(ErrorKind::empty_sample, "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(prob, 0.0, 1.0) * (values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double w = pos - lo;
  return (1.0 - w) * values[lo] + w * values[hi];
}

QuadratureResult integrate(const Integrand& f, double lo, double hi, double rel_tol)
{
  QuadratureResult r;
  // Intervals a few ulps wide defeat the relative error test; midpoint is exact enough.
  if (std::fabs(hi - lo) <= 1e-13 * std::max(1.0, std::max(std::fabs(lo), std::fabs(hi)))) {
    r.value = (hi - lo) * f(0.5 * (lo + hi));
    return r;
  }
  // Boost 1.74 compares the unscaled reference-interval error against the
  // scaled estimate, which forces full-depth recursion on short intervals.
  // Integrating over [-1, 1] keeps the two on the same scale.
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  auto g = [&](double s) { return half * f(mid + half * s); };
  r.value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
    g, -1.0, 1.0, 15, rel_tol, &r.error);
  return r;
}

QuadratureResult integrate_singular(const Integrand& f, double lo, double hi, double rel_tol)
{
  thread_local boost::math::quadrature::tanh_sinh<double> integrator;
  QuadratureResult r;
  auto g = [&f](double x) { return f(x); };
  r.value = integrator.integrate(g, lo, hi, rel_tol, &r.error);
  return r;
}

QuadratureResult integrate_to_infinity(const Integrand& f, double lo, double rel_tol)
{
  thread_local boost::math::quadrature::exp_sinh<double> integrator;
  QuadratureResult r;
  auto shifted = [&](double u) { return f(lo + u); };
  r.value = integrator.integrate(shifted, rel_tol, &r.error);
  return r;
}

double trapezoid(std::span<const double> x, std::span<const double> y)
{
  if (x.size() != y.size())
    throw Error(ErrorKind::invalid_argument, "trapezoid: length mismatch");
  if (x.size() < 2)
    return 0.0;
  std::vector<double> panels(x.size() - 1);
  for (std::size_t i = 0; i + 1 < x.size(); ++i)
    panels[i] = 0.5 * (x[i + 1] - x[i]) * (y[i] + y[i + 1]);
  return pairwise_sum(panels);
}

LinearFit ols(std::span<const double> x, std::span<const double> y)
{
  const std::size_t n = x.size();
  if (n != y.size() || n < 2)
    throw Error(ErrorKind::invalid_argument, "ols needs at least two paired points");
  const double mx = mean(x);
  const double my = mean(y);
  std::vector<double> sxy(n), sxx(n);
  for (std::size_t i = 0; i < n; ++i) {
    sxy[i] = (x[i] - mx) * (y[i] - my);
    sxx[i] = (x[i] - mx) * (x[i] - mx);
  }
  const double denom = pairwise_sum(sxx);
  if (denom <= 0.0)
    throw Error(ErrorKind::invalid_argument, "ols: regressor has no spread");
  LinearFit fit;
  fit.n = n;
  fit.slope = pairwise_sum(sxy) / denom;
  fit.intercept = my - fit.slope * mx;
  std::vector<double> res2(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    res2[i] = r * r;
  }
  fit.residual_std = n > 2 ? std::sqrt(pairwise_sum(res2) / (n - 2)) : 0.0;
  fit.slope_ci_lo = fit.slope;
  fit.slope_ci_hi = fit.slope;
  return fit;
}

LinearFit ols_bootstrap(std::span<const double> x,
                        std::span<const double> y,
                        std::uint64_t seed,
                        int resamples)
{
  LinearFit fit = ols(x, y);
  const std::size_t n = x.size();
  std::vector<double> residuals(n);
  for (std::size_t i = 0; i < n; ++i)
    residuals[i] = y[i] - fit.intercept - fit.slope * x[i];

  std::vector<double> slopes;
  slopes.reserve(resamples);
  std::vector<double> yb(n);
  for (int k = 0; k < resamples; ++k) {
    std::mt19937_64 rng(mix64(seed + 0x9E3779B97F4A7C15ULL * (k + 1)));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t i = 0; i < n; ++i)
      yb[i] = fit.intercept + fit.slope * x[i] + residuals[pick(rng)];
    slopes.push_back(ols(x, yb).slope);
  }
  if (!slopes.empty()) {
    fit.slope_ci_lo = quantile(slopes, 0.025);
    fit.slope_ci_hi = quantile(slopes, 0.975);
  }
  return fit;
}

std::uint64_t mix64(std::uint64_t z)
{
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

unsigned worker_count()
{
  if (const char* env = std::getenv("SQRTDIFF_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0)
        return static_cast<unsigned>(v);
    } catch (const std::exception&) {
      // fall through to the hardware default
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n,
                  unsigned workers,
                  const std::function<void(std::size_t, std::size_t)>& body)
{
  if (n == 0)
    return;
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n)));
  if (workers == 1) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end)
      break;
    pool.emplace_back([&, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure)
          failure = std::current_exception();
      }
    });
  }
  for (auto& th : pool)
    th.join();
  if (failure)
    std::rethrow_exception(failure);
}

std::vector<double> linspace(double lo, double hi, std::size_t n)
{
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i)
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  out.back() = hi;
  return out;
}

std::vector<double> logspace(double lo, double hi, std::size_t n)
{
  if (!(lo > 0.0) || !(hi > 0.0))
    throw Error(ErrorKind::invalid_argument, "logspace needs positive bounds");
  auto out = linspace(std::log(lo), std::log(hi), n);
  for (auto& v : out)
    v = std::exp(v);
  if (n > 0) {
    out.front() = lo;
    out.back() = hi;
  }
  return out;
}

} // namespace sqrtdiff::numerics
