#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace sqrtdiff::cir {

//! Transition law of the constant-coefficient CIR process
//! dX = (a - b X) dt + gamma sqrt(X) dW started at x: X_t / L_t is
//! noncentral chi-square with delta degrees of freedom and noncentrality
//! zeta.
struct CIRParams
{
  double a = 1.0;
  double b = 1.0;
  double gamma = 1.0;
  double x = 1.0;
  double t = 1.0;

  double L = 0.0;     // scale L_t
  double delta = 0.0; // 4 a / gamma^2
  double zeta = 0.0;  // noncentrality
};

//! L_t = (1 - e^{-bt}) gamma^2 / (4b), zeta_t = 4 x b / (gamma^2 (e^{bt} - 1)),
//! with the b -> 0 limits L_t = gamma^2 t / 4, zeta_t = 4 x / (gamma^2 t).
CIRParams cir_params(double a, double b, double gamma, double x, double t);

enum class DensityMethod
{
  series,
  bessel
};

std::string to_string(DensityMethod method);

struct DensityPoint
{
  double y = 0.0;
  double pdf = 0.0;
  int series_terms_used = 0;
  DensityMethod method = DensityMethod::series;
};

//! Noncentral chi-square density by the Poisson-weighted series, summed
//! outward from its largest term. zeta = 0 gives the central density.
DensityPoint ncx2_pdf(double z, double delta, double zeta);

//! Same density through the modified Bessel function:
//! 1/2 e^{-(z+zeta)/2} (z/zeta)^{delta/4 - 1/2} I_{delta/2-1}(sqrt(zeta z)).
DensityPoint ncx2_pdf_bessel(double z, double delta, double zeta);

//! Poisson mixture of regularized lower incomplete gamma functions.
double ncx2_cdf(double z, double delta, double zeta);

//! Exponentially scaled modified Bessel function e^{-x} I_nu(x), x > 0.
double bessel_i_scaled(double nu, double x);

//! pdf of X_t at y: ncx2_pdf(y / L_t) / L_t.
DensityPoint cir_density(const CIRParams& p, double y);

double cir_cdf(const CIRParams& p, double y);

struct Moments
{
  double mean = 0.0;
  double variance = 0.0;
};

Moments cir_mean_var(const CIRParams& p);

//! One draw of X_t given X_0 = p.x using the supplied engine.
double cir_exact_sample(const CIRParams& p, std::mt19937_64& rng);

//! One draw from a freshly seeded engine; deterministic in seed.
double cir_exact_sample(const CIRParams& p, std::uint64_t seed);

//! Noncentral chi-square variate. delta > 1: chi2_{delta-1} + (N + sqrt(zeta))^2;
//! delta <= 1: chi2_{delta + 2K} with K ~ Poisson(zeta / 2).
double sample_ncx2(double delta, double zeta, std::mt19937_64& rng);

} // namespace sqrtdiff::cir
