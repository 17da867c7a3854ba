#pragma once

#include <stdexcept>
#include <string>

namespace qubodbn {

// Dimension or length mismatch between arguments.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Value outside the mathematical domain of an operation (e.g. a probability > 1).
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Invalid argument that is neither a shape nor a domain problem (empty batch, infeasible split).
struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Exhaustive routine asked to enumerate beyond its size guard.
struct CapacityError : std::length_error {
    using std::length_error::length_error;
};

// Incompatible combination of options.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed file or byte stream.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TruncationError : FormatError {
    using FormatError::FormatError;
};

struct UnsupportedError : FormatError {
    using FormatError::FormatError;
};

}  // namespace qubodbn
