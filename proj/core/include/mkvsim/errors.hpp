#pragma once

#include <stdexcept>
#include <string>

namespace mkvsim {

// One enumerator per distinct failure class; the CLI maps these to exit codes.
enum class errc {
  invalid_argument,
  non_conservative,
  negative_rate,
  reducible,
  solve_failed,
  length_mismatch,
  dimension_mismatch,
  size_mismatch,
  too_large,
  state_mismatch,
  g_not_state_free,
  envelope_violated,
  unknown_model,
  non_finite_state,
  grid_mismatch,
  no_convergence,
  insufficient_replicates,
  inequality_violated,
  non_positive_data,
  parse_error,
  schema_error,
  validation_error,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::invalid_argument: return "InvalidArgument";
    case errc::non_conservative: return "NonConservative";
    case errc::negative_rate: return "NegativeRate";
    case errc::reducible: return "Reducible";
    case errc::solve_failed: return "SolveFailed";
    case errc::length_mismatch: return "LengthMismatch";
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::size_mismatch: return "SizeMismatch";
    case errc::too_large: return "TooLarge";
    case errc::state_mismatch: return "StateMismatch";
    case errc::g_not_state_free: return "GNotStateFree";
    case errc::envelope_violated: return "EnvelopeViolated";
    case errc::unknown_model: return "UnknownModel";
    case errc::non_finite_state: return "NonFiniteState";
    case errc::grid_mismatch: return "GridMismatch";
    case errc::no_convergence: return "NoConvergence";
    case errc::insufficient_replicates: return "InsufficientReplicates";
    case errc::inequality_violated: return "InequalityViolated";
    case errc::non_positive_data: return "NonPositiveData";
    case errc::parse_error: return "ParseError";
    case errc::schema_error: return "SchemaError";
    case errc::validation_error: return "ValidationError";
  }
  return "Error";
}

class Error : public std::runtime_error {
public:
  Error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  errc code() const { return code_; }

private:
  errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, errc code, const std::string& what) {
  if (!ok) raise(code, what);
}

}
