#pragma once

#include <stdexcept>
#include <string>

namespace evtta {

/// Malformed input bytes or text. The message names the offending line or
/// byte offset.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Structurally valid input that violates a documented precondition
/// (out-of-range coordinate, bad config value, mismatched dimensions).
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Arithmetic left the domain of a formula (non-positive radicand, zero
/// variance where a spread is required).
class NumericError : public std::domain_error {
public:
    explicit NumericError(const std::string& msg) : std::domain_error(msg) {}
};

} // namespace evtta
