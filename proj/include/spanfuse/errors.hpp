#pragma once

#include <stdexcept>

namespace spanfuse {

/// Input bytes could not be decoded (bad JSON, bad span encoding).
/// Messages carry file path and line number where known.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input decoded but violates a domain invariant (span offsets, gold
/// consistency, degenerate calibration data, ...).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad run configuration: flags, strategy combinations.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A run would exceed its compute budget (e.g. too many exhaustive subsets).
class BudgetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace spanfuse
