#pragma once

#include <stdexcept>
#include <string>

namespace splat4d {

/// Bad configuration (unknown scenario, invalid hyperparameter, ...).
/// CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or inconsistent on-disk data (manifest, images, checkpoints).
/// CLI maps this to exit code 3.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numeric failure: non-finite values, degenerate covariance, and the like.
/// CLI maps this to exit code 4.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Array/image dimensions do not match the operation's contract.
class ShapeError : public std::invalid_argument {
public:
    explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Input outside the mathematical domain of an operation
/// (t outside [0,1], rotation correction beyond the small-angle regime, ...).
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& msg) : std::domain_error(msg) {}
};

} // namespace splat4d
