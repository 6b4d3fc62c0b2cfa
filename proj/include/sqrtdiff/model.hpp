#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sqrtdiff::model {

using ScalarFn = std::function<double(double)>;

//! Derivative closure: (x, order) -> d^order f / dx^order at x, order >= 1.
using DerivativeFn = std::function<double(double, int)>;

enum class Family
{
  constant,
  tabulated,
  user
};

std::string to_string(Family family);

//! Knot data kept alongside a tabulated family so it can be serialized.
struct TabulatedData
{
  std::vector<double> knots;
  std::vector<double> a;
  std::vector<double> b;
  std::vector<double> gamma;
};

//! Coefficients of dX = (a(X) - b(X) X) dt + gamma(X) X^alpha dW.
//!
//! Derivative closures refer to a, b and gamma themselves; the drift and
//! diffusion derivatives are assembled from them by the Leibniz rule.
//! `analytic_order` is the highest order the closures can deliver
//! (0 means none, finite differences are used instead).
struct CoefficientSet
{
  ScalarFn a;
  ScalarFn b;
  ScalarFn gamma;
  double alpha = 0.5;
  double eta = 0.0;

  DerivativeFn a_derivative;
  DerivativeFn b_derivative;
  DerivativeFn gamma_derivative;
  int analytic_order = 0;

  Family family = Family::user;

  // Populated for the constant family.
  double a_const = 0.0;
  double b_const = 0.0;
  double gamma_const = 0.0;

  // Populated for the tabulated family.
  std::optional<TabulatedData> table;
};

inline constexpr int unlimited_order = std::numeric_limits<int>::max();

CoefficientSet constant_coefficients(double a, double b, double gamma, double alpha);

//! Monotone piecewise-cubic (PCHIP) interpolation of a, b, gamma on the
//! knots, flat beyond the end knots. Needs at least four knots.
CoefficientSet tabulated_coefficients(TabulatedData data, double alpha, double eta = 0.0);

CoefficientSet user_coefficients(ScalarFn a,
                                 ScalarFn b,
                                 ScalarFn gamma,
                                 double alpha,
                                 double eta = 0.0);

//! Checks the (s0) requirements that can be checked pointwise: alpha in
//! [1/2, 1), a(0) >= 0 and gamma^2 > 0 on a probe grid of (0, 100].
//! Throws Error(validation_error).
void validate(const CoefficientSet& c);

struct Coefficients
{
  double drift = 0.0;
  double diffusion = 0.0;
};

//! drift = a(x) - b(x) x, diffusion = gamma(x) x^alpha. Throws NonFinite.
Coefficients eval_coefficients(const CoefficientSet& c, double x);

//! k-th derivative of the drift / diffusion, k >= 0. Uses the analytic
//! closures up to `analytic_order`, central finite differences beyond
//! (unless allow_finite_differences is false: MissingDerivatives).
double drift_derivative(const CoefficientSet& c, double x, int k,
                        bool allow_finite_differences = true);
double diffusion_derivative(const CoefficientSet& c, double x, int k,
                            bool allow_finite_differences = true);

//! Fourth-order central difference of order k (1 <= k <= 8) of f at x.
double finite_difference(const ScalarFn& f, double x, int k);

// --- norm tables ----------------------------------------------------------

enum class Ball
{
  r1 = 0, // B_R(y0)
  r3 = 1, // B_3R(y0)
  r5 = 2  // B_5R(y0)
};

struct NormTable
{
  double y0 = 0.0;
  double R = 1.0;
  int k_max = 0;

  // [ball][k] = 1 + sum_{j <= k} sup_ball |f^(j)|
  std::vector<std::vector<double>> drift;
  std::vector<std::vector<double>> diffusion;

  // Optional global norms over a declared range.
  std::vector<double> global_drift;
  std::vector<double> global_diffusion;

  //! Ellipticity lower bound on B_3R: min(1, inf diffusion^2).
  double c_star = 1.0;

  // Growth profile tested by check_growth.
  double q = 1.0;
  double q_bar = 0.0;
  double C0 = 0.5;
  std::vector<double> Ck; // Ck[k-1] for derivative order k

  //! Sampled sups are certified lower bounds only.
  bool lower_bound = true;

  double drift_norm(int k, Ball ball = Ball::r5) const;
  double diffusion_norm(int k, Ball ball = Ball::r5) const;
};

struct NormOptions
{
  int points_per_ball = 2048;
  bool allow_finite_differences = true;
};

NormTable local_norms(const CoefficientSet& c,
                      double y0,
                      double R,
                      int k_max,
                      const NormOptions& options = {});

//! Fills table.global_drift / global_diffusion from a sampled sup on [lo, hi].
void global_norms(NormTable& table,
                  const CoefficientSet& c,
                  double lo,
                  double hi,
                  const NormOptions& options = {});

//! Table whose every norm equals `value` (>= 1) for orders 0..k_max on
//! all three balls; c_star = 1.
NormTable uniform_norm_table(double value, int k_max, double R = 1.0);

// --- growth and boundary-side conditions ----------------------------------

enum class Status
{
  pass,
  fail,
  inconclusive,
  not_applicable
};

std::string to_string(Status status);

struct ConditionResult
{
  std::string name;
  Status status = Status::inconclusive;
  std::vector<double> witnesses;
  std::string note;
  std::optional<double> value; // e.g. x_bar for (s2), liminf for the b-condition
};

struct GrowthReport
{
  std::vector<ConditionResult> conditions;
  std::vector<double> grid;

  const ConditionResult* find(const std::string& name) const;
};

//! Evaluates (H4) growth and ellipticity, (s1)', (s1), (s2) and the
//! b-condition liminf b(x) x^(1-alpha) > -inf. Condition names:
//! "H4-growth", "H4-elliptic", "s1-prime", "s1", "s2", "b-condition".
GrowthReport check_growth(const CoefficientSet& c,
                          const NormTable& table,
                          const std::vector<double>& grid);

//! Integrability of f on (0, z0] decided from dyadic panel integrals
//! [z0 2^-(j+1), z0 2^-j], j = 0..39: pass (integrable) when the last ten
//! panel ratios are all <= 0.95, fail when all >= 0.999, else inconclusive.
ConditionResult integrability_at_zero(const ScalarFn& f, double z0);

} // namespace sqrtdiff::model
