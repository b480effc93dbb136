#pragma once

#include <stdexcept>
#include <string>

namespace slab {

// Base class for all library errors. Subclasses map onto the CLI exit
// codes: ConfigError -> 1, ParseError -> 2, NumericError -> 3, the rest
// are programming/contract errors and also exit 3.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Incompatible matrix/vector shapes. Message names both shapes.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Argument outside its mathematical domain (empty input, k out of range, ...).
class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

// Malformed input file. Message carries a byte offset or line number.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

// Non-finite values produced while training. Message carries epoch/batch context.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

// Invalid experiment configuration. Message holds one line per violation.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

} // namespace slab
