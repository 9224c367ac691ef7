#pragma once

#include <stdexcept>
#include <string>

namespace mqi {

/// Bad or missing configuration input (file, key, or CLI flag). CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure (rank-deficient fit, degenerate statistics). CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// API misuse: mismatched batch sizes, mixed hypotheses, and similar caller bugs.
class UsageError : public std::logic_error {
public:
    explicit UsageError(const std::string& what) : std::logic_error(what) {}
};

} // namespace mqi
