#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sqrtdiff::density {

enum class Method
{
  analytic,
  kde,
  kde_log,
  fourier_local
};

std::string to_string(Method m);

struct Localization
{
  double y0 = 0.0;
  double R = 1.0;
};

struct DensityEstimate
{
  std::vector<double> grid;
  std::vector<double> values;
  Method method = Method::analytic;
  //! Kernel bandwidth for kde methods, |xi| cutoff for fourier-local.
  double bandwidth = 0.0;
  std::size_t n_samples = 0;
  std::optional<Localization> localization;
  //! fourier-local: mass m0 of the bump under the sample law.
  double m0 = 0.0;
  //! fourier-local: largest negative value relative to the peak.
  double ripple = 0.0;
  //! fourier-local: largest |imaginary part| relative to the peak.
  double imaginary_residue = 0.0;
  //! fourier-local: rough size of the neglected |xi| > cutoff integral,
  //! extrapolated from the last tenth of the xi range.
  double truncation_estimate = 0.0;
  //! The bump has zero mass under the sample; the density is 0 on B_R(y0).
  bool zero_mass = false;
};

enum class Kernel
{
  gaussian,
  log_gaussian
};

//! Silverman's rule 0.9 min(sd, IQR / 1.34) n^{-1/5}.
double silverman_bandwidth(std::span<const double> samples);

//! Silverman on the raw sample (gaussian) or on log X (log_gaussian).
double default_bandwidth(std::span<const double> samples, Kernel kernel);

//! gaussian: (1 / n h) sum phi((y - X_i) / h).
//! log_gaussian: (1 / n h y) sum phi((log y - log X_i) / h), 0 for y <= 0.
//! Throws EmptySample, NonpositiveSample (log variant), InvalidArgument for h <= 0.
DensityEstimate kde(std::span<const double> samples,
                    std::span<const double> grid,
                    double bandwidth,
                    Kernel kernel);

//! Radial bump: 1 on [0, R], 0 on [2R, inf), 1 - s((r - R) / R) in between
//! with the quintic smoothstep s(u) = 6u^5 - 15u^4 + 10u^3.
double bump(double x, double R);

//! k-th derivative (k <= 3) of x -> bump(x, R); one-sided at the joins.
double bump_derivative(double x, double R, int k);

//! sup_x |d^k bump / dx^k| on a fine grid, k <= 3.
double bump_seminorm(double R, int k);

//! Uniform grid -xi_max, ..., xi_max with the given step (2n + 1 points).
std::vector<double> symmetric_grid(double xi_max, double step);

struct LocalizedCF
{
  double m0 = 0.0;
  //! Sampling variance of each cf value, sum w^2 / (sum w)^2 (0 for
  //! quadrature-based cfs).
  double noise_power = 0.0;
  std::vector<double> xi;
  std::vector<std::complex<double>> cf;
};

//! m0 = mean bump(X - y0, R); cf(xi) = mean e^{i xi X} bump(X - y0, R) / m0.
//! xi must be a symmetric uniform grid; the negative half is the conjugate of
//! the positive half. Throws ZeroMass when m0 = 0.
LocalizedCF empirical_localized_cf(std::span<const double> samples,
                                   double y0,
                                   double R,
                                   std::span<const double> xi,
                                   unsigned workers = 0);

//! Same functional for a density p on [0, inf), by composite Gauss-Legendre
//! on the support of the bump.
LocalizedCF localized_cf_from_density(const std::function<double(double)>& pdf,
                                      double y0,
                                      double R,
                                      std::span<const double> xi);

//! p^{(k)}(y) = m0 / 2pi int (-i xi)^k e^{-i xi y} cf(xi) d xi, trapezoid rule.
//! Throws NonHermitian if |cf(-xi) - conj cf(xi)| > 1e-12 anywhere.
DensityEstimate invert_cf(double m0,
                          std::span<const std::complex<double>> cf,
                          std::span<const double> xi,
                          std::span<const double> grid,
                          int k = 0);

struct FourierOptions
{
  double y0 = 1.0;
  double R = 1.0;
  double xi_max = 256.0;
  double xi_step = 0.05;
  //! Cut the xi range where the mean of |cf|^2 over [xi, xi + window] first
  //! falls to noise_factor times the sampling noise power.
  bool adaptive_cutoff = true;
  double noise_factor = 1.25;
  double window = 8.0;
  unsigned workers = 0;
};

//! Localized cf of the sample, inverted on grid. The zero-mass case gives the
//! zero density with zero_mass set.
DensityEstimate fourier_local_density(std::span<const double> samples,
                                      std::span<const double> grid,
                                      const FourierOptions& options);

//! First xi >= 0 where the mean of |cf|^2 over [xi, xi + window_width] is at
//! most power_threshold (the last xi if it never is).
double cf_cutoff(const LocalizedCF& cf, double power_threshold, double window_width);

} // namespace sqrtdiff::density
