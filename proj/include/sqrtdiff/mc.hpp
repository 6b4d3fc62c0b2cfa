#pragma once

#include "sqrtdiff/model.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sqrtdiff::mc {

enum class Scheme
{
  full_truncation_euler,
  exact_cir
};

std::string to_string(Scheme scheme);

//! Accepts "full-truncation-euler" / "euler" and "exact-cir" / "exact".
Scheme parse_scheme(std::string_view name);

//! Identifier of the per-path seed rule recorded in every ensemble.
inline constexpr std::string_view seed_rule_id = "splitmix64(mix(master) + golden * index)";

//! Injective in the index for a fixed master seed and in the master seed
//! for a fixed index (both steps are bijections of 64-bit words).
std::uint64_t derive_path_seed(std::uint64_t master_seed, std::uint64_t path_index);

struct SimulationOptions
{
  double x = 1.0;
  double t = 1.0;
  int n_steps = 512;
  std::size_t n_paths = 100000;
  Scheme scheme = Scheme::full_truncation_euler;
  std::uint64_t master_seed = 0;
  //! Number of evenly spaced grid points stored per path (0 stores none,
  //! otherwise at least 2: the start and the horizon).
  int record_points = 17;
  //! 0 picks numerics::worker_count().
  unsigned workers = 0;
};

//! Paths on the uniform grid t_k = k t / n_steps. Only the recorded states
//! and per-path summaries are kept; the summaries cover every grid point.
struct PathEnsemble
{
  std::vector<double> time_grid;
  std::size_t n_paths = 0;
  int n_steps = 0;
  Scheme scheme = Scheme::full_truncation_euler;
  std::uint64_t master_seed = 0;
  std::string seed_rule;
  double x = 0.0;
  double t = 0.0;

  std::vector<int> record_steps;
  std::vector<double> states; // row-major n_paths x record_steps.size(), raw values

  std::vector<double> terminal; // raw X_t
  std::vector<double> path_min; // min of the raw state over the grid
  std::vector<double> path_max; // max of max(X, 0) over the grid

  //! First grid index inside [(t - 1) v t/2, t].
  int window_begin = 0;
  std::vector<double> window_min; // of max(X, 0) over the window
  std::vector<double> window_max;

  double state(std::size_t path, std::size_t record) const
  {
    return states[path * record_steps.size() + record];
  }
};

//! Throws SchemeMismatch for exact-cir on a non-constant or alpha != 1/2 model,
//! InvalidArgument for n_steps < 1, n_paths < 1 or x < 0.
PathEnsemble simulate_paths(const model::CoefficientSet& c, const SimulationOptions& options);

struct PathFunctionalResult
{
  double estimate = 0.0;
  double std_error = 0.0;
  std::size_t n_paths = 0;
  std::string descriptor;
  //! Fraction of paths whose minimum is at or below the positivity floor.
  double below_floor_fraction = 0.0;
};

//! Fraction of paths whose piecewise-linear interpolant comes within 3R of
//! y0 during [(t - 1) v t/2, t]; binomial standard error.
PathFunctionalResult estimate_ball_prob(const PathEnsemble& e, double y0, double R);

enum class Sign
{
  plus,
  minus
};

inline constexpr double positivity_floor = 1e-12;

//! plus: mean of (sup_s max(X_s, 0))^r. minus: mean of (inf_s X_s)^{-r};
//! throws NonpositivePath if a path reaches the floor unless
//! allow_nonpositive, in which case such paths are dropped and counted.
PathFunctionalResult sup_moment(const PathEnsemble& e,
                                double r,
                                Sign sign,
                                bool allow_nonpositive = false);

//! Mean of max(X_t, 0).
PathFunctionalResult terminal_mean(const PathEnsemble& e);

struct RefinementReport
{
  std::vector<int> steps;
  std::vector<PathFunctionalResult> results;
  //! last estimate / first estimate
  double ratio = 1.0;
  bool stable = false;
};

//! Re-simulates at each step count (same master seed) and compares the
//! sup-moment across the refinement; stable when |ratio - 1| <= tolerance.
RefinementReport refine_sup_moment(const model::CoefficientSet& c,
                                   SimulationOptions options,
                                   double r,
                                   Sign sign,
                                   const std::vector<int>& steps,
                                   double tolerance = 0.10);

} // namespace sqrtdiff::mc
