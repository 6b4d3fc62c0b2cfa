#include "sqrtdiff/error.hpp"

namespace sqrtdiff {

std::string_view to_string(ErrorKind kind)
{
  switch (kind) {
    case ErrorKind::non_finite: return "NonFinite";
    case ErrorKind::ball_touches_singularity: return "BallTouchesSingularity";
    case ErrorKind::missing_derivatives: return "MissingDerivatives";
    case ErrorKind::missing_norm: return "MissingNorm";
    case ErrorKind::degenerate_time: return "DegenerateTime";
    case ErrorKind::out_of_regime: return "OutOfRegime";
    case ErrorKind::series_not_converged: return "SeriesNotConverged";
    case ErrorKind::quadrature_failure: return "QuadratureFailure";
    case ErrorKind::scheme_mismatch: return "SchemeMismatch";
    case ErrorKind::nonpositive_path: return "NonpositivePath";
    case ErrorKind::empty_sample: return "EmptySample";
    case ErrorKind::nonpositive_sample: return "NonpositiveSample";
    case ErrorKind::zero_mass: return "ZeroMass";
    case ErrorKind::non_hermitian: return "NonHermitian";
    case ErrorKind::nonpositive_density: return "NonpositiveDensity";
    case ErrorKind::invalid_argument: return "InvalidArgument";
    case ErrorKind::parse_error: return "ParseError";
    case ErrorKind::validation_error: return "ValidationError";
    case ErrorKind::io_error: return "IoError";
  }
  return "Unknown";
}

} // namespace sqrtdiff
