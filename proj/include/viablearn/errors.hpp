#pragma once

#include <stdexcept>
#include <string>

namespace viablearn {

/// Base class for all errors raised by the library. `kind()` is a short
/// machine-readable tag used by the CLI when reporting failures.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class IntegrationDivergence : public Error {
public:
    explicit IntegrationDivergence(const std::string& what) : Error("integration-divergence", what) {}
};

class PreconditionError : public Error {
public:
    explicit PreconditionError(const std::string& what) : Error("precondition", what) {}
};

class GridMismatch : public Error {
public:
    explicit GridMismatch(const std::string& what) : Error("grid-mismatch", what) {}
};

class IllConditioned : public Error {
public:
    explicit IllConditioned(const std::string& what) : Error("ill-conditioned", what) {}
};

class UnrecoverableConstraint : public Error {
public:
    explicit UnrecoverableConstraint(const std::string& what) : Error("unrecoverable-constraint", what) {}
};

}  // namespace viablearn
