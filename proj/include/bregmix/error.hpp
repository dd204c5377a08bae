#pragma once

#include <stdexcept>
#include <string>

namespace bregmix {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or precondition violation on user-supplied input.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A filter or mixture weight became non-finite (step size too large).
class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& where)
        : Error("divergence detected: " + where) {}
};

/// A numerical routine hit a degenerate case (singular matrix, vanishing denominator).
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace bregmix
