#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace sublin {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller supplied inputs that violate a documented precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// CFL violation, non-finite values, overflow guards.
class NumericalFailure : public Error {
public:
    using Error::Error;
};

/// An iterative construction did not reach its stopping rule.
class ConvergenceFailure : public Error {
public:
    ConvergenceFailure(const std::string& what, std::vector<double> trace)
        : Error(what), trace_(std::move(trace)) {}

    const std::vector<double>& trace() const noexcept { return trace_; }

private:
    std::vector<double> trace_;
};

}  // namespace sublin
