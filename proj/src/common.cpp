#include <cctype>

#include "hptmpc/errors.hpp"
#include "hptmpc/types.hpp"

namespace hptmpc {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::DegenerateSet: return "DegenerateSet";
        case ErrorKind::Unbounded: return "Unbounded";
        case ErrorKind::NotProper: return "NotProper";
        case ErrorKind::NotMember: return "NotMember";
        case ErrorKind::OutOfSchedulingSet: return "OutOfSchedulingSet";
        case ErrorKind::EmptySchedulingSet: return "EmptySchedulingSet";
        case ErrorKind::LengthMismatch: return "LengthMismatch";
        case ErrorKind::NonConvexSynthesis: return "NonConvexSynthesis";
        case ErrorKind::RiccatiDivergence: return "RiccatiDivergence";
        case ErrorKind::NotContractive: return "NotContractive";
        case ErrorKind::NoConvergence: return "NoConvergence";
        case ErrorKind::TerminalViolation: return "TerminalViolation";
        case ErrorKind::Infeasible: return "Infeasible";
        case ErrorKind::SolverFailure: return "SolverFailure";
        case ErrorKind::ImplementabilityViolation: return "ImplementabilityViolation";
        case ErrorKind::RefinementViolation: return "RefinementViolation";
        case ErrorKind::InfeasibleAtStep: return "InfeasibleAtStep";
        case ErrorKind::MissingArtifacts: return "MissingArtifacts";
        case ErrorKind::InvalidInput: return "InvalidInput";
    }
    return "Unknown";
}

Norm parse_norm(const std::string& s) {
    std::string t;
    for (char c : s) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (t == "inf" || t == "infinity" || t == "linf") return Norm::Inf;
    if (t == "1" || t == "one" || t == "l1") return Norm::One;
    throw Error(ErrorKind::InvalidInput, "unknown norm '" + s + "' (expected inf or 1)");
}

const char* to_string(Norm n) { return n == Norm::Inf ? "inf" : "1"; }

double norm(const Vector& v, Norm kind) {
    if (v.size() == 0) return 0.0;
    return kind == Norm::Inf ? v.lpNorm<Eigen::Infinity>() : v.lpNorm<1>();
}

void Tolerances::validate() const {
    if (!(feas_tol > 0.0) || !(geom_tol > 0.0) || !(contract_tol > 0.0)) {
        throw Error(ErrorKind::InvalidInput, "tolerances must be strictly positive");
    }
}

}  // namespace hptmpc
