#pragma once

#include <stdexcept>
#include <string>

namespace mobgen {

/// Base of every error raised by the library. The CLI maps the concrete
/// subclasses onto process exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Violated precondition or malformed user input (exit code 2).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Configuration schema violation (exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Non-finite values, degenerate statistics, diverged training (exit code 3).
class NumericError : public Error {
public:
    using Error::Error;
};

/// File system, format and checksum failures (exit code 4).
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace mobgen
