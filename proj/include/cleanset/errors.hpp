#pragma once

#include <stdexcept>
#include <string>

namespace cleanset {

// Bad user-facing configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Incompatible shapes in matrix / model plumbing.
class DimensionError : public std::runtime_error {
public:
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite value where a finite one is required (CLI exit code 3).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Zero-norm feature vector, degenerate class center, constant scores.
class DegenerateDataError : public std::runtime_error {
public:
    explicit DegenerateDataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Too few samples to fit a mixture; callers may aggregate and retry.
class InsufficientDataError : public std::runtime_error {
public:
    explicit InsufficientDataError(const std::string& msg) : std::runtime_error(msg) {}
};

// AUC requested with single-class ground truth.
class UndefinedMetricError : public std::runtime_error {
public:
    explicit UndefinedMetricError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cleanset
