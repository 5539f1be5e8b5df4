#pragma once

#include <stdexcept>
#include <string>

namespace bsvie {

// Invalid argument or malformed input; the CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// Numerically unusable regression system (e.g. singular normal equations).
class RegressionError : public std::runtime_error {
public:
    explicit RegressionError(const std::string& what) : std::runtime_error(what) {}
};

// Sustained growth of successive Picard norms; the CLI maps this to exit code 3.
class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent scenario configuration; the CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace bsvie
