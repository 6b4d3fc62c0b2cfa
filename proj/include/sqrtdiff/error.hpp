#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sqrtdiff {

enum class ErrorKind
{
  non_finite,
  ball_touches_singularity,
  missing_derivatives,
  missing_norm,
  degenerate_time,
  out_of_regime,
  series_not_converged,
  quadrature_failure,
  scheme_mismatch,
  nonpositive_path,
  empty_sample,
  nonpositive_sample,
  zero_mass,
  non_hermitian,
  nonpositive_density,
  invalid_argument,
  parse_error,
  validation_error,
  io_error
};

//! Stable machine-readable name, used in the CLI's structured error output.
std::string_view to_string(ErrorKind kind);

//! Single exception type for the library; the kind identifies the failure.
class Error : public std::runtime_error
{
public:
  Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(what)
    , kind_(kind)
  {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

} // namespace sqrtdiff
