#pragma once

#include <Eigen/Dense>
#include <string>

namespace hptmpc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Polyhedral vector norms; the only ones that keep the synthesis problem an LP.
enum class Norm { One, Inf };

Norm parse_norm(const std::string& s);
const char* to_string(Norm norm);
double norm(const Vector& v, Norm kind);

/// Numerical slack used throughout the library.
struct Tolerances {
    double feas_tol = 1e-8;      // constraint-satisfaction slack
    double geom_tol = 1e-9;      // vertex dedup / redundancy distance
    double contract_tol = 1e-6;  // contractivity certificate slack

    /// Throws InvalidInput unless all fields are strictly positive.
    void validate() const;
};

}  // namespace hptmpc
