// Error taxonomy shared across the library.
#pragma once

#include <stdexcept>
#include <string>

namespace xtrack {

// Shape or size mismatch between tensors.
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A required column or field is missing from an input file.
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A cell or line of an input file could not be parsed.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Configuration is inconsistent or a checkpoint does not match it.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API misuse (e.g. optimizer step without populated gradients).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A computation produced or encountered non-finite values.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input data violates a pipeline precondition (degenerate scenario, bad timing).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace xtrack
