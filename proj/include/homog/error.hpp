#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace homog {

/// Machine-readable error category, mapped onto CLI exit codes.
enum class ErrorCategory { config, coverage, solver, statistics, io, internal };

std::string_view category_name(ErrorCategory c);
int exit_code(ErrorCategory c);

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

/// Requested domain is not covered by the sampled field extent.
class CoverageError : public Error {
public:
    explicit CoverageError(const std::string& what) : Error(ErrorCategory::coverage, what) {}
};

/// Iterative solver hit its iteration cap; carries the last relative residual.
class SolverError : public Error {
public:
    SolverError(const std::string& what, double residual, long iterations)
        : Error(ErrorCategory::solver, what), residual_(residual), iterations_(iterations) {}

    double residual() const noexcept { return residual_; }
    long iterations() const noexcept { return iterations_; }

private:
    double residual_;
    long iterations_;
};

/// Neumann load with nonzero total.
class CompatibilityError : public Error {
public:
    explicit CompatibilityError(const std::string& what) : Error(ErrorCategory::solver, what) {}
};

/// Mesh too coarse for the requested geometry (eps-cells, cutoff collar).
class ResolutionError : public Error {
public:
    explicit ResolutionError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

/// A marginal law without the integrability a routine needs.
class LawUnsuitableError : public Error {
public:
    explicit LawUnsuitableError(const std::string& what) : Error(ErrorCategory::statistics, what) {}
};

/// Monte Carlo output inconsistent with a deterministic bracket.
class StudyInconsistencyError : public Error {
public:
    explicit StudyInconsistencyError(const std::string& what)
        : Error(ErrorCategory::statistics, what) {}
};

/// Two computational routes for the same quantity disagree.
class InternalConsistencyError : public Error {
public:
    explicit InternalConsistencyError(const std::string& what)
        : Error(ErrorCategory::internal, what) {}
};

class PreconditionError : public Error {
public:
    explicit PreconditionError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

}  // namespace homog
