#include "sqrtdiff/cir.hpp"
#include "sqrtdiff/error.hpp"
#include "sqrtdiff/numerics.hpp"

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace sqrtdiff::cir {

namespace {

constexpr int max_series_terms = 10000;
constexpr double series_rel_tol = 1e-16;
constexpr double log_two = 0.69314718055994530942;

// (1 - e^{-bt}) / b, continuous at b = 0.
double one_minus_exp_over_b(double b, double t)
{
  return b == 0.0 ? t : -std::expm1(-b * t) / b;
}

} // namespace

std::string to_string(DensityMethod method)
{
  return method == DensityMethod::series ? "series" : "bessel";
}

CIRParams cir_params(double a, double b, double gamma, double x, double t)
{
  if (!(a > 0.0) || !(gamma > 0.0) || !(t > 0.0) || !(x >= 0.0)) {
    throw Error(ErrorKind::invalid_argument,
                "cir_params needs a > 0, gamma > 0, t > 0 and x >= 0");
  }
  CIRParams p{a, b, gamma, x, t};
  const double g2 = gamma * gamma;
  p.L = one_minus_exp_over_b(b, t) * g2 / 4.0;
  p.delta = 4.0 * a / g2;
  // zeta = 4 x b / (g2 (e^{bt} - 1)) = 4 x / (g2 (e^{bt} - 1) / b)
  const double growth = b == 0.0 ? t : std::expm1(b * t) / b;
  p.zeta = 4.0 * x / (g2 * growth);
  return p;
}

DensityPoint ncx2_pdf(double z, double delta, double zeta)
{
  if (!(z > 0.0) || !(delta > 0.0) || !(zeta >= 0.0))
    throw Error(ErrorKind::invalid_argument, "ncx2_pdf needs z > 0, delta > 0, zeta >= 0");

  const double h = 0.5 * delta;
  const double base = -0.5 * zeta - 0.5 * z + (h - 1.0) * std::log(z) - h * log_two;
  DensityPoint out;
  out.y = z;
  out.method = DensityMethod::series;

  if (zeta == 0.0) {
    out.pdf = std::exp(base - std::lgamma(h));
    out.series_terms_used = 1;
    return out;
  }

  const double log_w = std::log(z * zeta / 4.0);
  auto log_term = [&](int n) {
    return base + n * log_w - std::lgamma(n + 1.0) - std::lgamma(h + n);
  };

  // Largest term: (n + 1)(n + h) = w.
  const double w = z * zeta / 4.0;
  const double bq = 1.0 + h;
  const double root = 0.5 * (-bq + std::sqrt(bq * bq - 4.0 * (h - w)));
  const int mode = std::max(0, static_cast<int>(std::floor(root)));
  const double log_peak = log_term(mode);
  // The sum spans at most a few sqrt(mode) terms around the peak, so a peak
  // this small leaves the density below the double underflow floor.
  if (log_peak < -800.0) {
    out.pdf = 0.0;
    out.series_terms_used = 1;
    return out;
  }

  double sum = 1.0;
  int used = 1;
  double prev = 1.0;
  for (int n = mode + 1;; ++n) {
    const double term = std::exp(log_term(n) - log_peak);
    sum += term;
    ++used;
    if (term < series_rel_tol * sum && term <= prev)
      break;
    prev = term;
    if (used >= max_series_terms) {
      std::ostringstream msg;
      msg << "noncentral chi-square series did not converge within " << max_series_terms
          << " terms (z = " << z << ", delta = " << delta << ", zeta = " << zeta << ")";
      throw Error(ErrorKind::series_not_converged, msg.str());
    }
  }
  for (int n = mode - 1; n >= 0; --n) {
    const double term = std::exp(log_term(n) - log_peak);
    sum += term;
    ++used;
    if (term < series_rel_tol * sum)
      break;
  }
  out.pdf = std::exp(log_peak + std::log(sum));
  out.series_terms_used = used;
  return out;
}

double bessel_i_scaled(double nu, double x)
{
  if (!(x > 0.0))
    throw Error(ErrorKind::invalid_argument, "bessel_i_scaled needs x > 0");
  if (x < 500.0)
    return boost::math::cyl_bessel_i(nu, x) * std::exp(-x);
  // Hankel expansion: e^{-x} I_nu(x) ~ (2 pi x)^{-1/2} sum_k (-1)^k a_k(nu) / x^k
  const double mu = 4.0 * nu * nu;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 30; ++k) {
    term *= -(mu - (2.0 * k - 1.0) * (2.0 * k - 1.0)) / (k * 8.0 * x);
    sum += term;
    if (std::fabs(term) < 1e-17 * std::fabs(sum))
      break;
  }
  return sum / std::sqrt(2.0 * M_PI * x);
}

DensityPoint ncx2_pdf_bessel(double z, double delta, double zeta)
{
  if (!(z > 0.0) || !(delta > 0.0) || !(zeta >= 0.0))
    throw Error(ErrorKind::invalid_argument, "ncx2_pdf_bessel needs z > 0, delta > 0, zeta >= 0");
  DensityPoint out;
  out.y = z;
  out.method = DensityMethod::bessel;
  const double h = 0.5 * delta;
  if (zeta == 0.0) {
    out.pdf = std::exp((h - 1.0) * std::log(z) - 0.5 * z - h * log_two - std::lgamma(h));
    return out;
  }
  const double x = std::sqrt(zeta * z);
  const double log_i = x + std::log(bessel_i_scaled(h - 1.0, x));
  out.pdf = std::exp(-log_two - 0.5 * (z + zeta) + (0.5 * h - 0.5) * std::log(z / zeta) + log_i);
  return out;
}

double ncx2_cdf(double z, double delta, double zeta)
{
  if (!(delta > 0.0) || !(zeta >= 0.0))
    throw Error(ErrorKind::invalid_argument, "ncx2_cdf needs delta > 0, zeta >= 0");
  if (z <= 0.0)
    return 0.0;
  const double h = 0.5 * delta;
  if (zeta == 0.0)
    return boost::math::gamma_p(h, 0.5 * z);
  const double lam = 0.5 * zeta;
  const int mode = static_cast<int>(std::floor(lam));
  auto log_weight = [&](int n) { return -lam + n * std::log(lam) - std::lgamma(n + 1.0); };
  double sum = 0.0;
  for (int n = mode;; ++n) {
    const double w = std::exp(log_weight(n));
    sum += w * boost::math::gamma_p(h + n, 0.5 * z);
    if ((w < 1e-18 && n > lam) || n - mode > max_series_terms)
      break;
  }
  for (int n = mode - 1; n >= 0; --n) {
    const double w = std::exp(log_weight(n));
    sum += w * boost::math::gamma_p(h + n, 0.5 * z);
    if (w < 1e-18)
      break;
  }
  return std::min(1.0, sum);
}

DensityPoint cir_density(const CIRParams& p, double y)
{
  if (!(y > 0.0))
    throw Error(ErrorKind::invalid_argument, "cir_density needs y > 0");
  DensityPoint out = ncx2_pdf(y / p.L, p.delta, p.zeta);
  out.y = y;
  out.pdf /= p.L;
  return out;
}

double cir_cdf(const CIRParams& p, double y)
{
  return ncx2_cdf(y / p.L, p.delta, p.zeta);
}

Moments cir_mean_var(const CIRParams& p)
{
  const double decay = std::exp(-p.b * p.t);
  const double frac = one_minus_exp_over_b(p.b, p.t); // (1 - e^{-bt}) / b
  const double g2 = p.gamma * p.gamma;
  Moments m;
  m.mean = p.x * decay + p.a * frac;
  m.variance = p.x * g2 * decay * frac + 0.5 * p.a * g2 * frac * frac;
  return m;
}

double sample_ncx2(double delta, double zeta, std::mt19937_64& rng)
{
  auto chi2 = [&rng](double dof) {
    if (dof <= 0.0)
      return 0.0;
    std::gamma_distribution<double> g(0.5 * dof, 2.0);
    return g(rng);
  };
  if (delta > 1.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double shifted = normal(rng) + std::sqrt(zeta);
    return chi2(delta - 1.0) + shifted * shifted;
  }
  int k = 0;
  if (zeta > 0.0) {
    std::poisson_distribution<int> poisson(0.5 * zeta);
    k = poisson(rng);
  }
  return chi2(delta + 2.0 * k);
}

double cir_exact_sample(const CIRParams& p, std::mt19937_64& rng)
{
  return p.L * sample_ncx2(p.delta, p.zeta, rng);
}

double cir_exact_sample(const CIRParams& p, std::uint64_t seed)
{
  std::mt19937_64 rng(numerics::mix64(seed));
  return cir_exact_sample(p, rng);
}

} // namespace sqrtdiff::cir
