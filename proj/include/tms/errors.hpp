#pragma once

#include <stdexcept>
#include <string>

namespace tms {

// Base class for everything this library throws on purpose. The CLI maps the
// concrete subclasses onto distinct process exit codes.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration, violated construction invariant, bad CLI input.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// An argument left the admissible domain of an evaluation (e.g. u outside
// [0, u_max] in the reaction term).
class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

// The slow variable exceeded u_max during integration. Solvers catch this
// internally and return a truncated trajectory with an explicit status; it
// only escapes for the single-step update functions.
class DomainExhaustedError : public Error {
public:
    DomainExhaustedError(const std::string& msg, double value, long long step)
        : Error(msg), value(value), step(step) {}
    double value;    // the offending slow value
    long long step;  // index of the failing step
};

// An iterative solver hit its iteration cap.
class NonConvergenceError : public Error {
public:
    NonConvergenceError(const std::string& msg, double last_residual, int iterations)
        : Error(msg), last_residual(last_residual), iterations(iterations) {}
    double last_residual;
    int iterations;
};

// A requested resolved run would need more steps than the configured cap.
// Carries the projected cost so the caller can report it.
class InfeasibleCostError : public Error {
public:
    InfeasibleCostError(const std::string& msg, double projected_steps)
        : Error(msg), projected_steps(projected_steps) {}
    double projected_steps;
};

}  // namespace tms
