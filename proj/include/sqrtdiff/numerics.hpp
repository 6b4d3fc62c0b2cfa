#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace sqrtdiff::numerics {

//! Pairwise (cascade) summation. The result depends only on the order of
//! the input, never on how a caller chunks the work.
double pairwise_sum(std::span<const double> values);

double mean(std::span<const double> values);

//! Unbiased sample standard deviation; 0 for fewer than two values.
double sample_std(std::span<const double> values);

//! Linear interpolation quantile of an unsorted sample (copy is sorted).
double quantile(std::vector<double> values, double prob);

// --- quadrature -----------------------------------------------------------

struct QuadratureResult
{
  double value = 0.0;
  double error = 0.0;
};

using Integrand = std::function<double(double)>;

//! Adaptive Gauss-Kronrod on a finite interval.
QuadratureResult integrate(const Integrand& f,
                           double lo,
                           double hi,
                           double rel_tol = 1e-10);

//! Double-exponential quadrature on a finite interval; tolerates
//! integrable endpoint singularities.
QuadratureResult integrate_singular(const Integrand& f,
                                    double lo,
                                    double hi,
                                    double rel_tol = 1e-10);

//! Integral over [lo, +inf).
QuadratureResult integrate_to_infinity(const Integrand& f,
                                       double lo,
                                       double rel_tol = 1e-10);

//! Composite trapezoid rule on a (possibly nonuniform) grid.
double trapezoid(std::span<const double> x, std::span<const double> y);

// --- regression -----------------------------------------------------------

struct LinearFit
{
  double slope = 0.0;
  double intercept = 0.0;
  double slope_ci_lo = 0.0;
  double slope_ci_hi = 0.0;
  double residual_std = 0.0;
  std::size_t n = 0;
};

//! Ordinary least squares y = intercept + slope * x.
LinearFit ols(std::span<const double> x, std::span<const double> y);

//! OLS plus a 95% percentile interval on the slope from a residual
//! bootstrap; resample k draws from seed mix(seed, k).
LinearFit ols_bootstrap(std::span<const double> x,
                        std::span<const double> y,
                        std::uint64_t seed,
                        int resamples = 200);

// --- seeding and workers --------------------------------------------------

//! SplitMix64 finalizer; a bijection on 64-bit words.
std::uint64_t mix64(std::uint64_t z);

//! Worker count: SQRTDIFF_THREADS when set and positive, else hardware
//! concurrency (at least 1).
unsigned worker_count();

//! Splits [0, n) into contiguous chunks and runs body(begin, end) on up to
//! `workers` threads. The partition never affects results as long as
//! body writes only to indices it owns.
void parallel_for(std::size_t n,
                  unsigned workers,
                  const std::function<void(std::size_t, std::size_t)>& body);

//! n points equally spaced on [lo, hi] (n >= 2), endpoints included.
std::vector<double> linspace(double lo, double hi, std::size_t n);

//! n points equally spaced in log on [lo, hi], lo > 0.
std::vector<double> logspace(double lo, double hi, std::size_t n);

} // namespace sqrtdiff::numerics
