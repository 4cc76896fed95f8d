#ifndef PANELGUARD_ERRORS_HPP
#define PANELGUARD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace panelguard {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Inconsistent or invalid arguments (bad flags, out-of-domain parameters).
class UsageError : public Error {
public:
    explicit UsageError(const std::string& msg) : Error(msg) {}
};

/// Input data violates a precondition: malformed CSV, negative values, ...
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

/// A criteria table cannot be compiled into a criticality equation.
class FitError : public Error {
public:
    explicit FitError(const std::string& msg) : Error(msg) {}
};

}  // namespace panelguard

#endif
