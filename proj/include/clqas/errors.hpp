#pragma once

#include <stdexcept>
#include <string>

namespace clqas {

// Base for every error the library raises on contract violations.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dimension, length, or index inconsistency between arguments.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation
/// (zero vector where a norm is needed, negative Fisher entry, empty batch...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Inconsistent or invalid run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. Carries the 1-based line number when known.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Requested combination of modes is not implemented (e.g. gradients in shot mode).
class UnsupportedModeError : public Error {
public:
    using Error::Error;
};

} // namespace clqas
