#pragma once

#include <stdexcept>
#include <string>

namespace witness {

/// Malformed input text (.tra/.lab/certificate files). Carries a 1-based
/// line number when one is known; line 0 means "not line-specific".
class SyntaxError : public std::runtime_error {
public:
    SyntaxError(std::string msg, std::size_t line = 0)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + std::move(msg)
                                  : std::move(msg)),
          line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// A structurally well-formed input that violates a model or problem invariant
/// (row sums, negative probabilities, states without actions, ...).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Vector length does not match the dimension implied by the context.
class DimensionError : public std::runtime_error {
public:
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

/// An initial objective kind was requested for a mode it is not defined for.
class ModeMismatch : public std::runtime_error {
public:
    explicit ModeMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

/// A certificate of the wrong kind was passed (e.g. an upper-bound certificate
/// where a lower-bound one is required).
class KindMismatch : public std::runtime_error {
public:
    explicit KindMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

/// The LP/MILP backend gave up (iteration or node limit) where an answer was
/// required.
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace witness
