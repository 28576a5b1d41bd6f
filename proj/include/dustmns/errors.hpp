#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dustmns {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad inputs: malformed files, inconsistent configs, violated preconditions.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Failures of the numerics: domain violations, singular points, non-convergence.
class NumericalError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ParseError : public ValidationError {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : ValidationError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IntegrityError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ArgumentError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// A unit lacks a field the requested operation needs (p_true, aux, ...).
class DataError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class DomainError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class SingularityError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class DegenerateInputError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class BracketError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ConvergenceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Delta-method quantities requested at r_n in {0, n}.
class BoundaryError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class CalibrationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Misranking model is not doubly stochastic or its calibration map is not increasing.
class ModelError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace dustmns
