#pragma once

#include <stdexcept>
#include <string>

namespace cftc {

// Malformed input files (datasets, configs). CLI exit code 2.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Caller broke an operation precondition. CLI exit code 2.
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

// Checkpoint/corpus consistency failures (hash or shape mismatch,
// truncation). CLI exit code 4.
struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values in the training loop. CLI exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A synthetic corpus specification that cannot be realized. CLI exit code 2.
struct InfeasibleSpec : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cftc
