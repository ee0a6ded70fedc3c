#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fdot {

// Base of everything the library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input: malformed scenario, violated invariant, unknown id.
// The CLI maps these to exit code 2.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what, std::string field = {})
        : Error(what), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class LayoutError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// A parameter vector decodes to an impossible geometry (a_i >= b_i, negative depth, ...).
class GeometryError : public ValidationError {
public:
    GeometryError(const std::string& what, std::size_t index)
        : ValidationError(what, "values[" + std::to_string(index) + "]"), index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

// Argument outside the mathematical domain of a function (e.g. t <= 0).
class DomainError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Numerical failure. The CLI maps these to exit code 3.
class NumericalError : public Error {
public:
    using Error::Error;
};

class QuadratureError : public NumericalError {
public:
    QuadratureError(const std::string& what, double estimate, double value)
        : NumericalError(what), estimate_(estimate), value_(value) {}
    double error_estimate() const noexcept { return estimate_; }
    double value() const noexcept { return value_; }

private:
    double estimate_;
    double value_;
};

class PeakSearchError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class FactorizationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

// Forward model failed while perturbing parameter `index` for the Jacobian.
class SensitivityError : public NumericalError {
public:
    SensitivityError(const std::string& what, std::size_t index)
        : NumericalError(what), index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

}  // namespace fdot
