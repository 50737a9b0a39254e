#pragma once

#include <stdexcept>
#include <string>

namespace dgate {

// Base for everything the library throws. The CLI maps subclasses to exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad or inconsistent input (exit code 2).
struct InvalidInput : Error {
    using Error::Error;
};

// Numerical failures (exit code 3).
struct NumericalError : Error {
    using Error::Error;
};

struct NoSolution : NumericalError {
    using NumericalError::NumericalError;
};

struct DegenerateSeed : NumericalError {
    using NumericalError::NumericalError;
};

struct ConditioningError : NumericalError {
    using NumericalError::NumericalError;
};

struct TruncationError : NumericalError {
    using NumericalError::NumericalError;
};

struct StepSizeError : NumericalError {
    using NumericalError::NumericalError;
};

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw InvalidInput(msg);
}

}  // namespace dgate
