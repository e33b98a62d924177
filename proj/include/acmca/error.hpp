#pragma once

#include <stdexcept>
#include <string>

namespace acmca {

// Error taxonomy shared by the library and the CLI exit-code mapping:
// usage/config -> 2, data -> 3, numeric -> 4.

struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : UsageError {
    explicit ConfigError(const std::string& msg) : UsageError(msg) {}
};

// Incompatible tensor shapes; message names both shapes.
struct ShapeError : UsageError {
    explicit ShapeError(const std::string& msg) : UsageError(msg) {}
};

// Malformed or inconsistent input data (schema violations, empty
// intersections, unparseable rows).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values where finite ones are required (NaN loss, inf inputs).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace acmca
