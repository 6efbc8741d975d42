#pragma once

// Polytope kernel: dual representations, conversions, gauges, convex
// multipliers and inclusion tests.
//
// Vertex lists are stored column-wise (dim x q); halfspace descriptions as
// {x : H x <= h} with H of size m x dim.

#include "json.hpp"
#include <optional>

#include "hptmpc/types.hpp"

namespace hptmpc {

class Polytope {
public:
    Polytope() = default;

    /// V-rep only. Duplicate points (within tol) are merged; redundant interior
    /// points are kept until to_hrep() prunes them.
    static Polytope from_vertices(const Matrix& vertices, double tol = 1e-9);
    /// H-rep only.
    static Polytope from_halfspaces(const Matrix& H, const Vector& h);
    /// Axis-aligned box with both representations. lo[k] == hi[k] is allowed
    /// and yields a lower-dimensional box.
    static Polytope box(const Vector& lo, const Vector& hi);
    static Polytope point(const Vector& p);
    /// Stores both representations as given; the caller vouches for consistency.
    static Polytope from_both(const Matrix& vertices, const Matrix& H, const Vector& h);

    int dim() const { return dim_; }
    bool has_vrep() const { return has_v_; }
    bool has_hrep() const { return has_h_; }
    bool empty() const { return dim_ == 0; }

    const Matrix& vertices() const;
    const Matrix& H() const;
    const Vector& h() const;
    int num_vertices() const { return has_v_ ? static_cast<int>(v_.cols()) : 0; }
    int num_facets() const { return has_h_ ? static_cast<int>(H_.rows()) : 0; }
    Vector vertex(int i) const { return vertices().col(i); }

    bool is_singleton() const { return has_v_ && v_.cols() == 1; }
    /// Origin strictly inside: every h_j > tol (requires H-rep).
    bool is_proper(double tol = 0.0) const;
    /// Membership through the H-rep, or the V-rep for singletons.
    bool contains(const Vector& x, double slack) const;

private:
    int dim_ = 0;
    bool has_v_ = false;
    bool has_h_ = false;
    Matrix v_;
    Matrix H_;
    Vector h_;
};

/// Facets of conv(V) via the double description method; both reps stored,
/// vertex list pruned to extreme points. Throws DegenerateSet when the points
/// are not full-dimensional; NotProper when require_proper and 0 is not interior.
Polytope to_hrep(const Polytope& p, const Tolerances& tol = {}, bool require_proper = false);

/// Vertices of {x : Hx <= h} via the double description method; both reps
/// stored with an irredundant H. Throws Unbounded on a recession direction,
/// DegenerateSet when the set is empty or not full-dimensional.
Polytope to_vrep(const Polytope& p, const Tolerances& tol = {});

/// Like to_vrep but accepts lower-dimensional (still bounded, nonempty) sets;
/// the H-rep is kept as given. Returns nullopt when the set is empty.
std::optional<Polytope> vertices_of(const Polytope& p, const Tolerances& tol = {});

/// LP-based pruning: one LP per halfspace.
Polytope remove_redundancy(const Polytope& p, const Tolerances& tol = {});

/// Gauge of a point w.r.t. a proper polytope S.
double gauge(const Vector& x, const Polytope& S);
/// Supremum of the gauge over X (attained at a vertex of X).
double set_gauge(const Polytope& X, const Polytope& S);
/// Hausdorff distance between X and {0}: largest vertex norm.
double hausdorff_origin(const Polytope& X, Norm norm);

/// Convex multipliers of w w.r.t. the vertex list of W: minimal infinity norm,
/// ties broken by lexicographic minimization. Throws NotMember if w is not in W.
Vector convm(const Vector& w, const Polytope& W, const Tolerances& tol = {});
/// Same on a raw point list (columns; repeated or non-extreme points allowed).
Vector convm_points(const Vector& w, const Matrix& V, const Tolerances& tol = {});

/// Every vertex of A satisfies H_B v <= h_B + slack.
bool includes(const Polytope& A, const Polytope& B, double slack);

/// z + alpha * P. alpha == 0 yields the singleton {z}.
Polytope scale_translate(const Polytope& p, double alpha, const Vector& z);

/// Intersection in H-rep followed by re-vertexing. nullopt when empty.
std::optional<Polytope> intersect(const Polytope& a, const Polytope& b, const Tolerances& tol = {});

/// Image under a linear map, V-rep only (vertices may become redundant).
Polytope linear_map(const Matrix& M, const Polytope& p);

/// Lebesgue volume of a full-dimensional polytope (needs both reps).
double volume(const Polytope& p, const Tolerances& tol = {});

/// Affine rank of the vertex set (dim for full-dimensional sets).
int affine_rank(const Matrix& vertices, double tol);

/// Point in the interior maximizing the distance to the facets (Chebyshev
/// center) together with that radius.
std::pair<Vector, double> chebyshev_center(const Polytope& p);

// JSON encoding: {"dim": n, "vertices": [[...]], "H": [[...]], "h": [...]}.
void to_json(nlohmann::json& j, const Polytope& p);
void from_json(const nlohmann::json& j, Polytope& p);

namespace detail {
/// Extreme rays of the pointed cone {y : A y >= 0} (rays as columns,
/// normalized to unit infinity-norm). Throws DegenerateSet if A lacks full
/// column rank.
Matrix extreme_rays(const Matrix& A, double tol);
}  // namespace detail

}  // namespace hptmpc
