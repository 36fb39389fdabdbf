#pragma once

#include <stdexcept>
#include <string>

namespace protosent {

// Exception taxonomy. Everything user-facing derives from Error so the CLI
// can map any library failure to a single runtime exit code.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes inside a numeric op.
struct DimensionError : Error {
    using Error::Error;
};

// Structurally wrong input (feature width mismatch, wrong vector length).
struct SchemaError : Error {
    using Error::Error;
};

// Unreadable record in a data file; message carries the line number.
struct ParseError : Error {
    using Error::Error;
};

// Well-formed data that violates a dataset-level rule (label range, splits).
struct ValidationError : Error {
    using Error::Error;
};

// Bad configuration value or key.
struct ConfigError : Error {
    using Error::Error;
};

// API misuse (backward on a non-scalar, empty batch, ...).
struct ContractError : Error {
    using Error::Error;
};

// Non-finite value where a finite one is required.
struct NumericError : Error {
    using Error::Error;
};

// Prototype row collapsed below the representable norm guard.
struct DegeneratePrototypeError : NumericError {
    using NumericError::NumericError;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace protosent
