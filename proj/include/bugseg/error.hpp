#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bugseg {

// Base of every error thrown by the library. The CLI maps all of these to
// exit code 1; usage errors are handled by the argument parser (exit 2).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input document. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class DataError : public Error {
public:
    using Error::Error;
};

class DimensionError : public DataError {
public:
    using DataError::DataError;
};

class IntegrityError : public DataError {
public:
    using DataError::DataError;
};

class ParameterError : public Error {
public:
    using Error::Error;
};

class DivergenceError : public Error {
public:
    using Error::Error;
};

} // namespace bugseg
