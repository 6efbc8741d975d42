#pragma once

#include <stdexcept>
#include <string>

namespace hptmpc {

enum class ErrorKind {
    DegenerateSet,
    Unbounded,
    NotProper,
    NotMember,
    OutOfSchedulingSet,
    EmptySchedulingSet,
    LengthMismatch,
    NonConvexSynthesis,
    RiccatiDivergence,
    NotContractive,
    NoConvergence,
    TerminalViolation,
    Infeasible,
    SolverFailure,
    ImplementabilityViolation,
    RefinementViolation,
    InfeasibleAtStep,
    MissingArtifacts,
    InvalidInput,
};

const char* to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers (and the CLI
/// exit-code mapping) can dispatch without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Raised by the closed-loop code; remembers the time index at which it failed.
class StepError : public Error {
public:
    StepError(ErrorKind kind, int step, const std::string& what)
        : Error(kind, "k=" + std::to_string(step) + ": " + what), step_(step) {}

    int step() const noexcept { return step_; }

private:
    int step_;
};

}  // namespace hptmpc
