#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hdmi {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// The estimate is infinite for the given input (e.g. zero error rate).
class DivergenceError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Operation not available for this model kind or data type.
class UnsupportedModelError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Iterative model fit did not reach its tolerance.
class FitError : public std::runtime_error {
public:
    FitError(const std::string& what, double gradient_norm, int iterations)
        : std::runtime_error(what), gradient_norm_(gradient_norm), iterations_(iterations) {}

    double gradient_norm() const noexcept { return gradient_norm_; }
    int iterations() const noexcept { return iterations_; }

private:
    double gradient_norm_;
    int iterations_;
};

/// Malformed input file. Row and column are 1-based; 0 means "not applicable".
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t row = 0, std::size_t column = 0)
        : std::runtime_error(format(what, row, column)), row_(row), column_(column) {}

    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    static std::string format(const std::string& what, std::size_t row, std::size_t column) {
        if (row == 0) return what;
        std::string out = what + " (row " + std::to_string(row);
        if (column != 0) out += ", column " + std::to_string(column);
        return out + ")";
    }

    std::size_t row_;
    std::size_t column_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace hdmi
