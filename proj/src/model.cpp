#include "hptmpc/model.hpp"

#include <fstream>
#include <sstream>

#include "hptmpc/errors.hpp"

namespace hptmpc {

Matrix matrix_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.empty()) throw Error(ErrorKind::InvalidInput, "matrix must be a non-empty array of rows");
    // A bare vector is read as a column.
    if (!j[0].is_array()) {
        Matrix M(static_cast<Eigen::Index>(j.size()), 1);
        for (std::size_t i = 0; i < j.size(); ++i) M(static_cast<Eigen::Index>(i), 0) = j[i].get<double>();
        return M;
    }
    const std::size_t cols = j[0].size();
    Matrix M(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (j[i].size() != cols) throw Error(ErrorKind::InvalidInput, "ragged matrix");
        for (std::size_t k = 0; k < cols; ++k) M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
    }
    return M;
}

nlohmann::json matrix_to_json(const Matrix& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        nlohmann::json r = nlohmann::json::array();
        for (Eigen::Index k = 0; k < M.cols(); ++k) r.push_back(M(i, k));
        rows.push_back(r);
    }
    return rows;
}

Vector vector_from_json(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Polytope polytope_or_box(const nlohmann::json& j) {
    if (j.is_object() && j.contains("box")) {
        const auto& b = j["box"];
        Vector lo(static_cast<Eigen::Index>(b.size())), hi(static_cast<Eigen::Index>(b.size()));
        for (std::size_t k = 0; k < b.size(); ++k) {
            const auto i = static_cast<Eigen::Index>(k);
            if (b[k].is_array()) {
                lo[i] = b[k].at(0).get<double>();
                hi[i] = b[k].at(1).get<double>();
            } else {
                hi[i] = std::abs(b[k].get<double>());
                lo[i] = -hi[i];
            }
        }
        return Polytope::box(lo, hi);
    }
    return j.get<Polytope>();
}

bool LpvModel::b_constant() const { return b_dependent_indices(*this).empty(); }

std::vector<int> b_dependent_indices(const LpvModel& m) {
    std::vector<int> out;
    for (std::size_t i = 1; i < m.B.size(); ++i) {
        if (m.B[i].lpNorm<Eigen::Infinity>() != 0.0) out.push_back(static_cast<int>(i));
    }
    return out;
}

Matrix LpvModel::A_at(const Vector& theta) const {
    Matrix M = A[0];
    for (int i = 0; i < ntheta(); ++i) M += theta[i] * A[static_cast<std::size_t>(i) + 1];
    return M;
}

Matrix LpvModel::B_at(const Vector& theta) const {
    Matrix M = B[0];
    for (int i = 0; i < ntheta(); ++i) M += theta[i] * B[static_cast<std::size_t>(i) + 1];
    return M;
}

std::pair<Matrix, Matrix> LpvModel::eval_AB(const Vector& theta, const Tolerances& tol) const {
    if (theta.size() != ntheta()) throw Error(ErrorKind::InvalidInput, "scheduling vector has the wrong size");
    if (!Theta.contains(theta, tol.feas_tol)) throw Error(ErrorKind::OutOfSchedulingSet, "theta lies outside the scheduling set");
    return {A_at(theta), B_at(theta)};
}

Vector LpvModel::image_point(const Vector& x, const Vector& theta, const Vector& u) const {
    return A_at(theta) * x + B_at(theta) * u;
}

void LpvModel::validate() const {
    if (A.empty() || B.size() != A.size()) throw Error(ErrorKind::InvalidInput, "A and B families must have the same number of terms");
    const Eigen::Index n = A[0].rows();
    const Eigen::Index m = B[0].cols();
    for (const Matrix& a : A) {
        if (a.rows() != n || a.cols() != n) throw Error(ErrorKind::InvalidInput, "A matrices must be square and equally sized");
    }
    for (const Matrix& b : B) {
        if (b.rows() != n || b.cols() != m) throw Error(ErrorKind::InvalidInput, "B matrices must be n_x by n_u");
    }
    if (X.dim() != n || U.dim() != m || Theta.dim() != ntheta()) throw Error(ErrorKind::InvalidInput, "constraint set dimensions do not match the model");
    if (!X.is_proper(0.0)) throw Error(ErrorKind::NotProper, "state constraint set must contain the origin in its interior");
    if (!U.is_proper(0.0)) throw Error(ErrorKind::NotProper, "input constraint set must contain the origin in its interior");
    if (!Theta.has_vrep()) throw Error(ErrorKind::InvalidInput, "scheduling set needs a vertex representation");
    if (partition && partition->first + partition->second != ntheta()) {
        throw Error(ErrorKind::InvalidInput, "partition sizes must add up to n_theta");
    }
}

LpvModel model_from_json(const nlohmann::json& j) {
    LpvModel m;
    m.A.push_back(matrix_from_json(j.at("A").at("A0")));
    for (const auto& a : j.at("A").value("Ai", nlohmann::json::array())) m.A.push_back(matrix_from_json(a));
    m.B.push_back(matrix_from_json(j.at("B").at("B0")));
    const auto bi = j.at("B").value("Bi", nlohmann::json::array());
    for (const auto& b : bi) m.B.push_back(matrix_from_json(b));
    // Missing B_i default to zero.
    while (m.B.size() < m.A.size()) m.B.push_back(Matrix::Zero(m.B[0].rows(), m.B[0].cols()));
    if (m.B.size() != m.A.size()) throw Error(ErrorKind::InvalidInput, "more B_i than A_i terms");

    auto dual = [](Polytope p) { return p.has_vrep() && p.has_hrep() ? p : to_vrep(to_hrep(p)); };
    m.X = dual(polytope_or_box(j.at("X")));
    m.U = dual(polytope_or_box(j.at("U")));
    m.Theta = polytope_or_box(j.at("Theta"));
    if (!m.Theta.has_vrep()) m.Theta = *vertices_of(m.Theta);
    if (!m.Theta.has_hrep()) m.Theta = to_hrep(m.Theta);
    if (j.contains("partition")) {
        const auto p = j["partition"].get<std::vector<int>>();
        if (p.size() != 2) throw Error(ErrorKind::InvalidInput, "partition must be [n_theta1, n_theta2]");
        m.partition = std::pair{p[0], p[1]};
    }
    m.validate();
    return m;
}

nlohmann::json model_to_json(const LpvModel& m) {
    nlohmann::json j;
    j["A"]["A0"] = matrix_to_json(m.A[0]);
    j["A"]["Ai"] = nlohmann::json::array();
    for (std::size_t i = 1; i < m.A.size(); ++i) j["A"]["Ai"].push_back(matrix_to_json(m.A[i]));
    j["B"]["B0"] = matrix_to_json(m.B[0]);
    j["B"]["Bi"] = nlohmann::json::array();
    for (std::size_t i = 1; i < m.B.size(); ++i) j["B"]["Bi"].push_back(matrix_to_json(m.B[i]));
    j["X"] = m.X;
    j["U"] = m.U;
    j["Theta"] = m.Theta;
    if (m.partition) j["partition"] = {m.partition->first, m.partition->second};
    return j;
}

LpvModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::InvalidInput, "cannot open model file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::InvalidInput, "malformed model JSON: " + std::string(e.what()));
    }
    return model_from_json(j);
}

void validate_implementability(const LpvModel& m, bool theta_dependent_controls) {
    const std::vector<int> dep = b_dependent_indices(m);
    if (dep.empty() || !theta_dependent_controls) return;
    if (m.partition) {
        // B may only depend on the first block theta~1.
        std::vector<int> bad;
        for (int i : dep) {
            if (i > m.partition->first) bad.push_back(i);
        }
        if (bad.empty()) return;
        std::ostringstream os;
        os << "B depends on controller-scheduling components";
        for (int i : bad) os << " theta_" << i;
        throw Error(ErrorKind::NonConvexSynthesis, os.str());
    }
    std::ostringstream os;
    os << "B depends on";
    for (int i : dep) os << " theta_" << i;
    os << " while controls are scheduling-dependent and no partition is declared";
    throw Error(ErrorKind::NonConvexSynthesis, os.str());
}

}  // namespace hptmpc
