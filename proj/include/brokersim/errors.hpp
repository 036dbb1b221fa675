#pragma once

#include <stdexcept>
#include <string>

namespace brokersim {

// Parameter values outside their admissible domain (non-positive impact
// costs, negative rates, ...).
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// Parameters violate the standing regime assumptions the closed forms need
// (2 a_B > b, non-negative radicands).
struct RegimeError : std::runtime_error {
    explicit RegimeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad simulation / run configuration.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed session data (irregular spacing, missing columns, ...).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Optimization could not produce a feasible candidate.
struct OptError : std::runtime_error {
    explicit OptError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace brokersim
