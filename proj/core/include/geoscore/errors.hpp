#pragma once

#include <stdexcept>
#include <string>

namespace geoscore {

// Invalid argument or out-of-range input to an operation.
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input file (CSV / binary payload).
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Inconsistent or invalid configuration.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Operation not supported by the chosen variant.
struct CapabilityError : std::runtime_error {
    explicit CapabilityError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure at runtime (NaN state, degenerate geometry, ...).
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem failure.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace geoscore
