#pragma once

#include <stdexcept>
#include <string>

namespace voleval {

// Error taxonomy. The CLI maps these onto exit codes:
//   ConfigError -> 1, data errors -> 2, degenerate statistics -> 3.
struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : EvalError { using EvalError::EvalError; };
struct FormatError : EvalError { using EvalError::EvalError; };
struct UnsupportedShapeError : EvalError { using EvalError::EvalError; };
struct UnsupportedTypeError : EvalError { using EvalError::EvalError; };
struct IncompatibleGridsError : EvalError { using EvalError::EvalError; };
struct GenerationError : EvalError { using EvalError::EvalError; };
struct ConfigError : EvalError { using EvalError::EvalError; };
struct EmptyCohortError : EvalError { using EvalError::EvalError; };
struct IncomparableRunsError : EvalError { using EvalError::EvalError; };
struct InsufficientDataError : EvalError { using EvalError::EvalError; };
struct DegenerateStatisticsError : EvalError { using EvalError::EvalError; };

}  // namespace voleval
