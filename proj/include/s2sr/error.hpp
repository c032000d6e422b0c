#pragma once

#include <stdexcept>
#include <string>

namespace s2sr {

/// Base of every error raised by the library. The CLI maps subclasses onto
/// process exit codes (usage 1, data 2, divergence 3).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

/// Malformed, missing or inconsistent input data (including file I/O).
class DataError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
public:
    using Error::Error;
};

}  // namespace s2sr
