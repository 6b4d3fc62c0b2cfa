#pragma once

#include "sqrtdiff/model.hpp"

#include <cstdint>

namespace sqrtdiff::bounds {

//! Log-values above this cap cannot be exponentiated; they are reported
//! saturated instead of infinite.
inline constexpr double log_cap = 700.0;

//! A positive quantity carried by its natural log.
struct LogValue
{
  double log = 0.0;

  bool saturated() const { return !(log <= log_cap); }
  //! exp(log), or the largest double when saturated.
  double value() const;
};

struct BoundContext
{
  double t = 1.0;
  double T = 1.0;
  double R = 1.0;
  int m = 1;
  int d = 1;
  int k = 3;
  //! Stand-in for every existential constant C_{k,m,d}.
  double kappa = 1.0;
  //! Exponent applied to the exponential factors inside Theta_k.
  double gamma_exponent = 1.0;
};

//! Throws invalid_argument unless 0 < t <= T, 0 < R <= 1, kappa > 0,
//! m, d >= 1 and k >= 0.
void validate(const BoundContext& ctx);

//! BoundContext with gamma_exponent tied to kappa.
BoundContext make_context(double t, double T, double R, int m, int d, int k, double kappa = 1.0);

struct Exponentials
{
  LogValue e_p;
  LogValue e_p_Z;
};

//! e_p(t)   = exp(t^{p/2} (t^{1/2} nB1 + nA1)^p)
//! e^Z_p(t) = exp(t^{p/2} (t^{1/2} (nB1 + nA1^2) + nA1)^p)
Exponentials eval_exponentials(double p, double t, double nB1, double nA1);

//! Malliavin-matrix constant
//! 1 + (4/(t c) + 1)^m + c^{-2(m+1)} (t^{1/2} B0 A2^3 + A1^2)^{2(m+1)}.
double eval_K_m(double t, double c_star, int m, double B0, double A1, double A2);
LogValue log_K_m(double t, double c_star, int m, double B0, double A1, double A2);

struct Combinatorial
{
  std::int64_t phi_k = 0;       // 3 m (k + 4)^2
  std::int64_t phi_prime_k = 0; // 2 (k + 1) (m - 1)
  double q_prime_k = 0.0;       // polynomial-regime exponent of Lambda_k
};

//! phi_mk is the phi of order m*k, which is what q'_k uses.
std::int64_t phi(int k, int m);

Combinatorial eval_combinatorial(int k, int m, double q, double q_bar);

//! Every constant of the density bound for one (t, y0, R, m, k).
//! Polynomial factors are plain doubles; the exponential factors and the
//! assembled Theta/Lambda live in log space.
struct BoundValues
{
  // Local polynomial factors
  double P_0 = 1.0;        // P_0(t, y0)
  double P_1 = 1.0;        // P_1(t, y0)
  double P_k = 1.0;        // P_k(t, y0) at order ctx.k
  double P_sigma_k = 1.0;  // |sigma|_k P_{k+1}
  double P_sigma_mk = 1.0; // |sigma|_{mk} P_{mk+1}, used by Theta_k
  double P_Z_1 = 1.0;
  LogValue P_C_m;
  LogValue C_m;

  // Malliavin-matrix constant from the same norms.
  LogValue K_m;

  // Exponential factors entering Theta_k.
  LogValue e_8;
  LogValue e_2pow;    // e_{2^{mk+2}}
  LogValue e_Z_lin;   // e^Z_{32 m + 4}
  LogValue e_Z_2pow;  // e^Z_{2^{mk+4} m + 4}

  LogValue theta_k;
  LogValue lambda_k;

  std::int64_t phi_k = 0;
  std::int64_t phi_prime_k = 0;
  double q_prime_k = 0.0;

  bool any_saturated() const;
};

//! P_k, P^sigma, P^Z_1, P^C_m and C_m from the B_5R norms of the table.
//! Needs norms up to order m*k + 1. Throws MissingNorm.
BoundValues eval_local_polys(const model::NormTable& table, const BoundContext& ctx);

//! Adds the four exponential factors (from P_1, P^Z_1 at time ctx.t) and
//! Theta_k = C_m^{mk(mk+3)/2} (P^sigma_mk)^{phi_mk + (mk+2)^2}
//!           (e_8 v e_{2^{mk+2}})^gamma (e^Z_{32m+4} v e^Z_{2^{mk+4}m+4})^gamma.
LogValue eval_theta(BoundValues& partial, const BoundContext& ctx);

//! Lambda_k = kappa R^{-mk} (P_0^{mk} + Theta_k), in log space.
LogValue eval_lambda(const LogValue& theta_k, double P0, const BoundContext& ctx);

//! Direct (non-log) versions, for cross-checking the log-domain path.
double theta_direct(const BoundValues& partial, const BoundContext& ctx);
double lambda_direct(double theta_k, double P0, const BoundContext& ctx);

//! Full pipeline: local polys, K_m, Theta_k, Lambda_k and the
//! combinatorial exponents (q, q_bar taken from the table).
BoundValues evaluate(const model::NormTable& table, const BoundContext& ctx);

//! P_t(y0) (1 + t^{-m(2k+3)/2}) lambda; k_order = 0 for the density itself.
double density_upper_bound(double lambda, double P_t_y0, double t, int m, int k_order);

struct TailEnvelope
{
  double gamma0 = 0.25;
  double C = 4.5;
  double C3 = 1.0;
  double alpha = 0.5;
  double x = 0.0;
  double t = 1.0;
};

//! C = 2^{3 - 2 alpha} + 2 |gamma|_0^2 (1 - alpha)^2
double envelope_constant(double alpha, double gamma_sup);

TailEnvelope make_envelope(double alpha, double gamma_sup, double x, double t,
                           double gamma0 = 0.25, double C3 = 1.0);

//! C3 (1 + t^{-(2k+3)/2}) exp(-gamma0 (y - x)^{2(1-alpha)} / (2 C t)).
//! Throws OutOfRegime for y <= x + 1.
double tail_envelope(const TailEnvelope& env, double y, int k_order = 0);

//! Slope of -log envelope in (y - x)^{2(1-alpha)}: gamma0 / (2 C t).
double envelope_slope(const TailEnvelope& env);

//! min(1, E[sup |X|^r] / (|y| - 3)^r). Throws OutOfRegime for |y| <= 3.
double markov_tail_bound(double sup_moment_r, double r, double y);

// --- polynomial regime ------------------------------------------------------

struct PolynomialRegime
{
  int m = 1;
  int k = 3;
  double q = 2.0;
  double q_bar = 0.0;
  double C0 = 0.5;    // ellipticity constant in (0, 1)
  double kappa = 1.0;
  double t = 1.0;
};

//! Norm table at y0 whose norms saturate the polynomial growth bound with
//! unit constant (every norm = 1 + |y0|^q) and whose ellipticity equals
//! C0 |y0|^{-q_bar}.
model::NormTable saturated_norm_table(const PolynomialRegime& regime, double y0);

//! log Lambda_k(delta_y, y0) with R = 1 and delta_y = t/2 ^ 1 ^ |y0|^{-4q},
//! the time at which the exponential factors stay bounded in y0.
BoundValues polynomial_regime_bounds(const PolynomialRegime& regime, double y0);

} // namespace sqrtdiff::bounds
