#pragma once

#include "sqrtdiff/model.hpp"

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sqrtdiff::boundary {

//! Feller scale function
//!   p_c(x) = int_c^x exp(-2 int_c^y (a(z) - b(z) z) / (gamma(z)^2 z^{2 alpha}) dz) dy.
//!
//! Both integrals are taken in log-coordinates on panels of a quarter
//! octave anchored at c. Knot values of the inner and outer integral are
//! cached, so evaluating a decreasing sequence of points costs one panel
//! per new knot.
class ScaleFunction
{
public:
  ScaleFunction(const model::CoefficientSet& c, double cpoint);

  //! Inner integral 2 int_c^y drift / diffusion^2. Throws QuadratureFailure.
  double inner(double y);

  //! p_c(x); negative for x < c, may be -inf when exp(-inner) overflows.
  double operator()(double x);

  double cpoint() const { return cpoint_; }

private:
  double inner_at_knot(int k);
  double outer_at_knot(int k);
  double knot(int k) const;
  int knot_toward_c(double u) const;
  double inner_integrand(double v) const;
  double inner_from_knot(int k, double u);
  double outer_panel(int k, double u);

  const model::CoefficientSet& c_;
  double cpoint_;
  double log_c_;
  std::map<int, double> inner_cache_;
  std::map<int, double> outer_cache_;
};

//! One-shot evaluation of p_c(x).
double scale_function(const model::CoefficientSet& c, double cpoint, double x);

enum class Classification
{
  unattainable,
  attainable,
  inconclusive
};

std::string to_string(Classification c);

enum class Rule
{
  none,
  s1_prime_route,
  s1_s2_route,
  scale_limit,
  feller_constant
};

std::string to_string(Rule r);

struct LStarEstimate
{
  double value = 0.0;
  //! Spread of 2a/gamma^2 over the last ten tail points is below 1e-3 (relative).
  bool stable = false;
  //! l* > 1, the negative-moment condition for the square-root route.
  bool exceeds_one = false;
  std::vector<double> grid;
  std::vector<double> ratios;
};

struct BoundaryReport
{
  Classification classification = Classification::inconclusive;
  Rule rule = Rule::none;
  double cpoint = 1.0;
  std::vector<std::pair<double, double>> p_c_samples;
  std::vector<model::ConditionResult> conditions;
  std::optional<LStarEstimate> l_star;
  std::vector<std::string> notes;
};

//! Thresholds of the numeric scale-limit test on x_j = 2^-j, j = 1..40.
struct ScaleLimitRule
{
  double divergence_threshold = 1e6;
  double growth_factor = 1.5;
  int growth_points = 5;
  double convergence_ratio = 0.995;
  double ratio_spread = 0.01;
  int ratio_points = 10;
};

//! Sufficient conditions first ((s1)' for alpha > 1/2, (s1) and (s2) for
//! alpha = 1/2), then the numeric scale-limit test.
BoundaryReport classify_zero_boundary(const model::CoefficientSet& c,
                                      double cpoint = 1.0,
                                      const ScaleLimitRule& rule = {});

//! l* = liminf_{x->0} 2 a(x) / gamma(x)^2 on x_j = 2^-j, j = 0..40; the
//! estimate is the minimum over the last ten points.
LStarEstimate estimate_l_star(const model::CoefficientSet& c);

//! phi(x) = x^{1-alpha} / (gamma_sup (1 - alpha)).
double lamperti(double x, double alpha, double gamma_sup);

} // namespace sqrtdiff::boundary
