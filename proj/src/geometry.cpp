#include "hptmpc/geometry.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "hptmpc/errors.hpp"
#include "hptmpc/kernels.hpp"
#include "hptmpc/lp.hpp"

namespace hptmpc {

// ---------------------------------------------------------------------------
// Polytope

Polytope Polytope::from_vertices(const Matrix& vertices, double tol) {
    if (vertices.cols() == 0 || vertices.rows() == 0) {
        throw Error(ErrorKind::InvalidInput, "empty vertex list");
    }
    Polytope p;
    p.dim_ = static_cast<int>(vertices.rows());
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < vertices.cols(); ++i) {
        bool dup = false;
        for (Eigen::Index k : keep) {
            if ((vertices.col(i) - vertices.col(k)).lpNorm<Eigen::Infinity>() <= tol) {
                dup = true;
                break;
            }
        }
        if (!dup) keep.push_back(i);
    }
    p.v_.resize(p.dim_, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) p.v_.col(static_cast<Eigen::Index>(k)) = vertices.col(keep[k]);
    p.has_v_ = true;
    return p;
}

Polytope Polytope::from_halfspaces(const Matrix& H, const Vector& h) {
    if (H.rows() != h.size() || H.cols() == 0) {
        throw Error(ErrorKind::InvalidInput, "halfspace description has inconsistent sizes");
    }
    Polytope p;
    p.dim_ = static_cast<int>(H.cols());
    p.H_ = H;
    p.h_ = h;
    p.has_h_ = true;
    return p;
}

Polytope Polytope::box(const Vector& lo, const Vector& hi) {
    const Eigen::Index n = lo.size();
    if (hi.size() != n || n == 0) throw Error(ErrorKind::InvalidInput, "box bounds have mismatched sizes");
    for (Eigen::Index k = 0; k < n; ++k) {
        if (lo[k] > hi[k]) throw Error(ErrorKind::InvalidInput, "box lower bound exceeds upper bound");
    }
    Matrix H(2 * n, n);
    H << Matrix::Identity(n, n), -Matrix::Identity(n, n);
    Vector h(2 * n);
    h << hi, -lo;
    const Eigen::Index count = Eigen::Index{1} << n;
    Matrix V(n, count);
    for (Eigen::Index c = 0; c < count; ++c) {
        for (Eigen::Index k = 0; k < n; ++k) V(k, c) = ((c >> k) & 1) ? hi[k] : lo[k];
    }
    Polytope p = from_vertices(V, 0.0);
    p.H_ = H;
    p.h_ = h;
    p.has_h_ = true;
    return p;
}

Polytope Polytope::point(const Vector& x) { return box(x, x); }

Polytope Polytope::from_both(const Matrix& vertices, const Matrix& H, const Vector& h) {
    Polytope p = from_halfspaces(H, h);
    if (vertices.rows() != H.cols()) throw Error(ErrorKind::InvalidInput, "vertex/halfspace dimension mismatch");
    p.v_ = vertices;
    p.has_v_ = true;
    return p;
}

const Matrix& Polytope::vertices() const {
    if (!has_v_) throw Error(ErrorKind::InvalidInput, "polytope has no vertex representation");
    return v_;
}

const Matrix& Polytope::H() const {
    if (!has_h_) throw Error(ErrorKind::InvalidInput, "polytope has no halfspace representation");
    return H_;
}

const Vector& Polytope::h() const {
    if (!has_h_) throw Error(ErrorKind::InvalidInput, "polytope has no halfspace representation");
    return h_;
}

bool Polytope::is_proper(double tol) const {
    return has_h_ && h_.size() > 0 && h_.minCoeff() > tol;
}

bool Polytope::contains(const Vector& x, double slack) const {
    if (x.size() != dim_) throw Error(ErrorKind::InvalidInput, "dimension mismatch in membership test");
    if (has_h_) {
        if (h_.size() == 0) return true;
        return kernels::max_excess({H_.data(), static_cast<std::size_t>(H_.size())},
                                   {h_.data(), static_cast<std::size_t>(h_.size())},
                                   static_cast<std::size_t>(dim_), {x.data(), static_cast<std::size_t>(dim_)}) <= slack;
    }
    if (is_singleton()) return (x - v_.col(0)).lpNorm<Eigen::Infinity>() <= slack;
    // V-rep only: convex-combination feasibility.
    lp::Problem p;
    const int q = static_cast<int>(v_.cols());
    for (int i = 0; i < q; ++i) p.add_var(0.0, lp::kInf, 0.0);
    std::vector<lp::Term> sum;
    for (int i = 0; i < q; ++i) sum.push_back({i, 1.0});
    p.add_eq(sum, 1.0);
    for (int r = 0; r < dim_; ++r) {
        std::vector<lp::Term> row;
        for (int i = 0; i < q; ++i) row.push_back({i, v_(r, i)});
        p.add_le(row, x[r] + slack);
        p.add_ge(row, x[r] - slack);
    }
    return lp::DenseSimplex().solve(p).status == lp::Status::Optimal;
}

// ---------------------------------------------------------------------------
// Double description

namespace detail {
namespace {

class Bits {
public:
    explicit Bits(std::size_t n = 0) : w_((n + 63) / 64, 0) {}
    void set(std::size_t i) { w_[i / 64] |= std::uint64_t{1} << (i % 64); }
    bool test(std::size_t i) const { return (w_[i / 64] >> (i % 64)) & 1; }
    int count() const {
        int c = 0;
        for (auto w : w_) c += std::popcount(w);
        return c;
    }
    Bits operator&(const Bits& o) const {
        Bits r = *this;
        for (std::size_t k = 0; k < w_.size(); ++k) r.w_[k] &= o.w_[k];
        return r;
    }
    bool contains(const Bits& o) const {
        for (std::size_t k = 0; k < w_.size(); ++k) {
            if ((o.w_[k] & ~w_[k]) != 0) return false;
        }
        return true;
    }

private:
    std::vector<std::uint64_t> w_;
};

struct Ray {
    Vector r;
    Bits zero;
};

}  // namespace

Matrix extreme_rays(const Matrix& A_in, double tol) {
    const Eigen::Index d = A_in.cols();
    // Normalize rows; all-zero rows impose nothing.
    std::vector<Vector> rows;
    for (Eigen::Index i = 0; i < A_in.rows(); ++i) {
        const double s = A_in.row(i).lpNorm<Eigen::Infinity>();
        if (s > 0.0) rows.emplace_back(A_in.row(i).transpose() / s);
    }
    const std::size_t m = rows.size();
    Matrix A(static_cast<Eigen::Index>(m), d);
    for (std::size_t i = 0; i < m; ++i) A.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();

    // Initial simplicial cone from d linearly independent rows.
    Eigen::ColPivHouseholderQR<Matrix> qr(A.transpose());
    qr.setThreshold(1e-10);
    if (m < static_cast<std::size_t>(d) || qr.rank() < d) {
        throw Error(ErrorKind::DegenerateSet, "cone is not pointed (constraint matrix lacks full column rank)");
    }
    std::vector<int> basis_rows(static_cast<std::size_t>(d));
    std::vector<char> in_basis(m, 0);
    for (Eigen::Index k = 0; k < d; ++k) {
        basis_rows[static_cast<std::size_t>(k)] = qr.colsPermutation().indices()[k];
        in_basis[static_cast<std::size_t>(basis_rows[static_cast<std::size_t>(k)])] = 1;
    }
    Matrix AS(d, d);
    for (Eigen::Index k = 0; k < d; ++k) AS.row(k) = A.row(basis_rows[static_cast<std::size_t>(k)]);
    const Matrix R0 = AS.inverse();

    std::vector<Ray> rays;
    for (Eigen::Index k = 0; k < d; ++k) {
        Ray ray{R0.col(k), Bits(m)};
        ray.r /= ray.r.lpNorm<Eigen::Infinity>();
        for (Eigen::Index j = 0; j < d; ++j) {
            if (j != k) ray.zero.set(static_cast<std::size_t>(basis_rows[static_cast<std::size_t>(j)]));
        }
        rays.push_back(std::move(ray));
    }

    std::vector<double> val;
    for (std::size_t i = 0; i < m; ++i) {
        if (in_basis[i]) continue;
        const Vector& a = rows[i];
        val.resize(rays.size());
        std::vector<std::size_t> pos, neg, zer;
        for (std::size_t k = 0; k < rays.size(); ++k) {
            val[k] = a.dot(rays[k].r);
            if (val[k] > tol) pos.push_back(k);
            else if (val[k] < -tol) neg.push_back(k);
            else zer.push_back(k);
        }
        for (std::size_t k : zer) rays[k].zero.set(i);
        if (neg.empty()) continue;

        std::vector<Ray> fresh;
        for (std::size_t p : pos) {
            for (std::size_t n : neg) {
                Bits common = rays[p].zero & rays[n].zero;
                if (common.count() < d - 2) continue;
                bool adjacent = true;
                for (std::size_t k = 0; k < rays.size() && adjacent; ++k) {
                    if (k == p || k == n) continue;
                    if (rays[k].zero.contains(common)) adjacent = false;
                }
                if (!adjacent) continue;
                Ray ray{val[p] * rays[n].r - val[n] * rays[p].r, common};
                const double s = ray.r.lpNorm<Eigen::Infinity>();
                if (s <= 0.0) continue;
                ray.r /= s;
                ray.zero.set(i);
                fresh.push_back(std::move(ray));
            }
        }
        std::vector<Ray> next;
        next.reserve(pos.size() + zer.size() + fresh.size());
        for (std::size_t k = 0; k < rays.size(); ++k) {
            if (!(val[k] < -tol)) next.push_back(std::move(rays[k]));
        }
        for (Ray& r : fresh) next.push_back(std::move(r));
        rays = std::move(next);
    }

    Matrix out(d, static_cast<Eigen::Index>(rays.size()));
    for (std::size_t k = 0; k < rays.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = rays[k].r;
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Conversions

int affine_rank(const Matrix& vertices, double tol) {
    if (vertices.cols() <= 1) return 0;
    Matrix D = vertices.rightCols(vertices.cols() - 1).colwise() - vertices.col(0);
    const double scale = std::max(1.0, vertices.lpNorm<Eigen::Infinity>());
    Eigen::JacobiSVD<Matrix> svd(D);
    const Vector& sv = svd.singularValues();
    int r = 0;
    for (Eigen::Index k = 0; k < sv.size(); ++k) {
        if (sv[k] > tol * scale) ++r;
    }
    return r;
}

namespace {

// Affine-rank threshold used when deciding full-dimensionality and facet
// support; looser than geom_tol because it compares singular values.
constexpr double kRankTol = 1e-8;

Matrix dedupe_columns(const Matrix& V, double tol) {
    return Polytope::from_vertices(V, tol).vertices();
}

// Keeps one copy of (numerically) identical normalized rows.
void dedupe_rows(Matrix& H, Vector& h, double tol) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < H.rows(); ++i) {
        bool dup = false;
        for (Eigen::Index k : keep) {
            if ((H.row(i) - H.row(k)).lpNorm<Eigen::Infinity>() <= tol && std::abs(h[i] - h[k]) <= tol * (1.0 + std::abs(h[k]))) {
                dup = true;
                break;
            }
        }
        if (!dup) keep.push_back(i);
    }
    Matrix H2(static_cast<Eigen::Index>(keep.size()), H.cols());
    Vector h2(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        H2.row(static_cast<Eigen::Index>(k)) = H.row(keep[k]);
        h2[static_cast<Eigen::Index>(k)] = h[keep[k]];
    }
    H = std::move(H2);
    h = std::move(h2);
}

double tight_tol(const Tolerances& tol, double scale) { return std::max(1e2 * tol.geom_tol, 1e-9) * (1.0 + scale); }

// Facets of a full-dimensional polytope given by (V, H, h): rows whose tight
// vertices span an (n-1)-dimensional affine set.
void facet_rows(const Matrix& V, Matrix& H, Vector& h, const Tolerances& tol) {
    const Eigen::Index n = V.rows();
    const double scale = V.lpNorm<Eigen::Infinity>();
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < H.rows(); ++i) {
        std::vector<Eigen::Index> tight;
        for (Eigen::Index c = 0; c < V.cols(); ++c) {
            if (std::abs(H.row(i).dot(V.col(c)) - h[i]) <= tight_tol(tol, scale)) tight.push_back(c);
        }
        if (static_cast<Eigen::Index>(tight.size()) < n) continue;
        Matrix T(n, static_cast<Eigen::Index>(tight.size()));
        for (std::size_t k = 0; k < tight.size(); ++k) T.col(static_cast<Eigen::Index>(k)) = V.col(tight[k]);
        if (affine_rank(T, kRankTol) == n - 1) keep.push_back(i);
    }
    Matrix H2(static_cast<Eigen::Index>(keep.size()), n);
    Vector h2(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        H2.row(static_cast<Eigen::Index>(k)) = H.row(keep[k]);
        h2[static_cast<Eigen::Index>(k)] = h[keep[k]];
    }
    H = std::move(H2);
    h = std::move(h2);
    dedupe_rows(H, h, 1e-9);
}

// Normalizes each row of H to unit Euclidean norm.
void normalize_rows(Matrix& H, Vector& h) {
    for (Eigen::Index i = 0; i < H.rows(); ++i) {
        const double s = H.row(i).norm();
        if (s > 0.0) {
            H.row(i) /= s;
            h[i] /= s;
        }
    }
}

// Vertices of {x : Hx <= h}; throws Unbounded on recession directions.
Matrix enumerate_vertices(const Matrix& H, const Vector& h, const Tolerances& tol) {
    const Eigen::Index n = H.cols();
    Matrix A(H.rows() + 1, n + 1);
    A.setZero();
    A.block(0, 0, H.rows(), 1) = h;
    A.block(0, 1, H.rows(), n) = -H;
    A(H.rows(), 0) = 1.0;
    Matrix rays;
    try {
        rays = detail::extreme_rays(A, tol.geom_tol);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::DegenerateSet) {
            throw Error(ErrorKind::Unbounded, "halfspace description has a lineality direction");
        }
        throw;
    }
    std::vector<Vector> pts;
    for (Eigen::Index k = 0; k < rays.cols(); ++k) {
        const double t = rays(0, k);
        const Vector x = rays.col(k).tail(n);
        if (t <= 1e-12 * std::max(1.0, x.lpNorm<Eigen::Infinity>())) {
            if (x.lpNorm<Eigen::Infinity>() > 0.0) throw Error(ErrorKind::Unbounded, "polyhedron has a recession direction");
            continue;
        }
        pts.push_back(x / t);
    }
    Matrix V(n, static_cast<Eigen::Index>(pts.size()));
    for (std::size_t k = 0; k < pts.size(); ++k) V.col(static_cast<Eigen::Index>(k)) = pts[k];
    if (V.cols() == 0) return V;
    return dedupe_columns(V, std::max(tol.geom_tol, 1e-12) * (1.0 + V.lpNorm<Eigen::Infinity>()));
}

}  // namespace

Polytope to_hrep(const Polytope& p, const Tolerances& tol, bool require_proper) {
    Polytope out;
    if (p.has_vrep() && p.has_hrep()) {
        out = p;
    } else if (p.has_hrep()) {
        out = to_vrep(p, tol);
    } else {
        const Matrix& V = p.vertices();
        const Eigen::Index n = V.rows();
        if (affine_rank(V, kRankTol) < n) throw Error(ErrorKind::DegenerateSet, "vertex set is not full-dimensional");
        // Cone of valid inequalities (b, a): b - a.v >= 0 for every point.
        Matrix C(V.cols(), n + 1);
        C.col(0).setOnes();
        C.rightCols(n) = -V.transpose();
        const Matrix rays = detail::extreme_rays(C, tol.geom_tol);
        std::vector<Eigen::Index> facets;
        for (Eigen::Index k = 0; k < rays.cols(); ++k) {
            if (rays.col(k).tail(n).lpNorm<Eigen::Infinity>() > 1e-9) facets.push_back(k);
        }
        Matrix H(static_cast<Eigen::Index>(facets.size()), n);
        Vector h(static_cast<Eigen::Index>(facets.size()));
        for (std::size_t k = 0; k < facets.size(); ++k) {
            H.row(static_cast<Eigen::Index>(k)) = rays.col(facets[k]).tail(n).transpose();
            h[static_cast<Eigen::Index>(k)] = rays(0, facets[k]);
        }
        normalize_rows(H, h);
        facet_rows(V, H, h, tol);
        // Prune points that are not extreme: a vertex is tight on n facets
        // with linearly independent normals.
        const double scale = V.lpNorm<Eigen::Infinity>();
        std::vector<Eigen::Index> keep;
        for (Eigen::Index c = 0; c < V.cols(); ++c) {
            std::vector<Eigen::Index> tight;
            for (Eigen::Index i = 0; i < H.rows(); ++i) {
                if (std::abs(H.row(i).dot(V.col(c)) - h[i]) <= tight_tol(tol, scale)) tight.push_back(i);
            }
            if (static_cast<Eigen::Index>(tight.size()) < n) continue;
            Matrix N(static_cast<Eigen::Index>(tight.size()), n);
            for (std::size_t k = 0; k < tight.size(); ++k) N.row(static_cast<Eigen::Index>(k)) = H.row(tight[k]);
            Eigen::ColPivHouseholderQR<Matrix> qr(N);
            qr.setThreshold(kRankTol);
            if (qr.rank() == n) keep.push_back(c);
        }
        Matrix Vk(n, static_cast<Eigen::Index>(keep.size()));
        for (std::size_t k = 0; k < keep.size(); ++k) Vk.col(static_cast<Eigen::Index>(k)) = V.col(keep[k]);
        out = Polytope::from_both(Vk, H, h);
    }
    if (require_proper && !out.is_proper(0.0)) {
        throw Error(ErrorKind::NotProper, "origin is not in the interior of the polytope");
    }
    return out;
}

Polytope to_vrep(const Polytope& p, const Tolerances& tol) {
    if (p.has_vrep() && p.has_hrep()) return p;
    if (!p.has_hrep()) return to_hrep(p, tol, false);
    Matrix H = p.H();
    Vector h = p.h();
    normalize_rows(H, h);
    const Matrix V = enumerate_vertices(H, h, tol);
    if (V.cols() == 0) throw Error(ErrorKind::DegenerateSet, "halfspace description is empty");
    if (affine_rank(V, kRankTol) < V.rows()) throw Error(ErrorKind::DegenerateSet, "polytope is not full-dimensional");
    facet_rows(V, H, h, tol);
    return Polytope::from_both(V, H, h);
}

std::optional<Polytope> vertices_of(const Polytope& p, const Tolerances& tol) {
    if (p.has_vrep()) return p;
    Matrix H = p.H();
    Vector h = p.h();
    normalize_rows(H, h);
    // Rows with a zero normal are either vacuous or make the set empty.
    for (Eigen::Index i = 0; i < H.rows(); ++i) {
        if (H.row(i).lpNorm<Eigen::Infinity>() == 0.0 && h[i] < -tol.feas_tol) return std::nullopt;
    }
    const Matrix V = enumerate_vertices(H, h, tol);
    if (V.cols() == 0) return std::nullopt;
    return Polytope::from_both(V, p.H(), p.h());
}

Polytope remove_redundancy(const Polytope& p, const Tolerances& tol) {
    Matrix H = p.H();
    Vector h = p.h();
    normalize_rows(H, h);
    dedupe_rows(H, h, 1e-12);
    const Eigen::Index n = H.cols();
    std::vector<char> active(static_cast<std::size_t>(H.rows()), 1);
    lp::DenseSimplex solver;
    for (Eigen::Index i = 0; i < H.rows(); ++i) {
        lp::Problem prob;
        for (Eigen::Index k = 0; k < n; ++k) prob.add_var(-lp::kInf, lp::kInf, -H(i, k));
        for (Eigen::Index r = 0; r < H.rows(); ++r) {
            if (!active[static_cast<std::size_t>(r)]) continue;
            std::vector<lp::Term> row;
            for (Eigen::Index k = 0; k < n; ++k) row.push_back({static_cast<int>(k), H(r, k)});
            // Relax the candidate row so the LP stays bounded.
            prob.add_le(row, r == i ? h[r] + 1.0 : h[r]);
        }
        const lp::Solution s = solver.solve(prob);
        if (s.status == lp::Status::Optimal && -s.objective <= h[i] + tol.geom_tol) {
            active[static_cast<std::size_t>(i)] = 0;
        }
    }
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < H.rows(); ++i) {
        if (active[static_cast<std::size_t>(i)]) keep.push_back(i);
    }
    Matrix H2(static_cast<Eigen::Index>(keep.size()), n);
    Vector h2(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        H2.row(static_cast<Eigen::Index>(k)) = H.row(keep[k]);
        h2[static_cast<Eigen::Index>(k)] = h[keep[k]];
    }
    if (p.has_vrep()) return Polytope::from_both(p.vertices(), H2, h2);
    return Polytope::from_halfspaces(H2, h2);
}

// ---------------------------------------------------------------------------
// Gauges and norms

namespace {

void require_proper(const Polytope& S) {
    if (!S.has_hrep()) throw Error(ErrorKind::InvalidInput, "gauge requires a halfspace representation");
    if (!S.is_proper(0.0)) throw Error(ErrorKind::NotProper, "gauge set must contain the origin in its interior");
}

double gauge_unchecked(const Vector& x, const Polytope& S) {
    const double r = kernels::max_ratio({S.H().data(), static_cast<std::size_t>(S.H().size())},
                                        {S.h().data(), static_cast<std::size_t>(S.h().size())},
                                        static_cast<std::size_t>(S.dim()), {x.data(), static_cast<std::size_t>(x.size())});
    return std::max(0.0, r);
}

}  // namespace

double gauge(const Vector& x, const Polytope& S) {
    require_proper(S);
    if (x.size() != S.dim()) throw Error(ErrorKind::InvalidInput, "dimension mismatch in gauge");
    return gauge_unchecked(x, S);
}

double set_gauge(const Polytope& X, const Polytope& S) {
    require_proper(S);
    const Matrix& V = X.vertices();
    if (V.rows() != S.dim()) throw Error(ErrorKind::InvalidInput, "dimension mismatch in set gauge");
    double g = 0.0;
    for (Eigen::Index c = 0; c < V.cols(); ++c) g = std::max(g, gauge_unchecked(V.col(c), S));
    return g;
}

double hausdorff_origin(const Polytope& X, Norm kind) {
    const Matrix& V = X.vertices();
    double d = 0.0;
    for (Eigen::Index c = 0; c < V.cols(); ++c) d = std::max(d, norm(V.col(c), kind));
    return d;
}

// ---------------------------------------------------------------------------
// Convex multipliers

Vector convm(const Vector& w, const Polytope& W, const Tolerances& tol) { return convm_points(w, W.vertices(), tol); }

Vector convm_points(const Vector& w, const Matrix& V, const Tolerances& tol) {
    const int q = static_cast<int>(V.cols());
    const int n = static_cast<int>(V.rows());
    if (w.size() != n) throw Error(ErrorKind::InvalidInput, "dimension mismatch in convm");
    if (q == 1) {
        if ((w - V.col(0)).lpNorm<Eigen::Infinity>() > tol.feas_tol * (1.0 + V.lpNorm<Eigen::Infinity>())) {
            throw Error(ErrorKind::NotMember, "point is not the singleton set");
        }
        return Vector::Ones(1);
    }
    lp::DenseSimplex solver;

    // Variables: eta (q), e (reconstruction slack), s (infinity-norm bound).
    auto base = [&](double e_max) {
        lp::Problem p;
        for (int i = 0; i < q; ++i) p.add_var(0.0, lp::kInf, 0.0);
        const int e = p.add_var(0.0, e_max, 0.0);
        const int s = p.add_var(0.0, lp::kInf, 0.0);
        std::vector<lp::Term> sum;
        for (int i = 0; i < q; ++i) sum.push_back({i, 1.0});
        p.add_eq(sum, 1.0);
        for (int r = 0; r < n; ++r) {
            std::vector<lp::Term> row;
            for (int i = 0; i < q; ++i) row.push_back({i, V(r, i)});
            auto up = row;
            up.push_back({e, -1.0});
            p.add_le(up, w[r]);
            row.push_back({e, 1.0});
            p.add_ge(row, w[r]);
        }
        for (int i = 0; i < q; ++i) p.add_le({{i, 1.0}, {s, -1.0}}, 0.0);
        return std::tuple{p, e, s};
    };

    // 1) smallest reconstruction error; membership test.
    auto [p0, e0, s0] = base(lp::kInf);
    p0.set_cost(e0, 1.0);
    const lp::Solution r0 = solver.solve(p0);
    if (r0.status != lp::Status::Optimal) throw Error(ErrorKind::SolverFailure, "convex multiplier LP failed");
    const double scale = 1.0 + V.lpNorm<Eigen::Infinity>();
    if (r0.x[e0] > tol.feas_tol * scale) throw Error(ErrorKind::NotMember, "point lies outside the polytope");
    const double e_cap = r0.x[e0] + 1e-12 * scale;

    // 2) minimal infinity norm.
    auto [p1, e1, s1] = base(e_cap);
    p1.set_cost(s1, 1.0);
    const lp::Solution r1 = solver.solve(p1);
    if (r1.status != lp::Status::Optimal) throw Error(ErrorKind::SolverFailure, "convex multiplier LP failed");
    p1.set_cost(s1, 0.0);
    p1.set_bounds(s1, 0.0, r1.x[s1] + 1e-11);

    // 3) lexicographic tie-break.
    std::vector<double> eta(r1.x.begin(), r1.x.begin() + q);
    for (int k = 0; k < q; ++k) {
        p1.set_cost(k, 1.0);
        const lp::Solution rk = solver.solve(p1);
        p1.set_cost(k, 0.0);
        if (rk.status != lp::Status::Optimal) break;
        eta.assign(rk.x.begin(), rk.x.begin() + q);
        p1.set_bounds(k, 0.0, rk.x[k] + 1e-11);
    }
    Vector out(q);
    double total = 0.0;
    for (int i = 0; i < q; ++i) {
        out[i] = std::max(0.0, eta[static_cast<std::size_t>(i)]);
        total += out[i];
    }
    return out / total;
}

// ---------------------------------------------------------------------------
// Set relations and maps

bool includes(const Polytope& A, const Polytope& B, double slack) {
    if (A.dim() != B.dim()) throw Error(ErrorKind::InvalidInput, "dimension mismatch in inclusion test");
    const Matrix& V = A.vertices();
    const Matrix& H = B.H();
    const Vector& h = B.h();
    if (h.size() == 0) return true;
    const std::span<const double> Hs{H.data(), static_cast<std::size_t>(H.size())};
    const std::span<const double> hs{h.data(), static_cast<std::size_t>(h.size())};
    for (Eigen::Index c = 0; c < V.cols(); ++c) {
        if (kernels::max_excess(Hs, hs, static_cast<std::size_t>(B.dim()), {V.col(c).data(), static_cast<std::size_t>(V.rows())}) > slack) {
            return false;
        }
    }
    return true;
}

Polytope scale_translate(const Polytope& p, double alpha, const Vector& z) {
    if (alpha < 0.0) throw Error(ErrorKind::InvalidInput, "scale factor must be nonnegative");
    if (z.size() != p.dim()) throw Error(ErrorKind::InvalidInput, "dimension mismatch in translation");
    if (alpha == 0.0) return Polytope::point(z);
    Polytope out;
    if (p.has_hrep()) {
        const Vector h = alpha * p.h() + p.H() * z;
        if (p.has_vrep()) {
            Matrix V = (alpha * p.vertices()).colwise() + z;
            out = Polytope::from_both(V, p.H(), h);
        } else {
            out = Polytope::from_halfspaces(p.H(), h);
        }
    } else {
        Matrix V = (alpha * p.vertices()).colwise() + z;
        out = Polytope::from_vertices(V, 0.0);
    }
    return out;
}

std::optional<Polytope> intersect(const Polytope& a, const Polytope& b, const Tolerances& tol) {
    if (a.dim() != b.dim()) throw Error(ErrorKind::InvalidInput, "dimension mismatch in intersection");
    // Singletons carry no H-rep; membership decides.
    if (a.is_singleton() && !a.has_hrep()) {
        if (b.contains(a.vertex(0), tol.feas_tol)) return a;
        return std::nullopt;
    }
    if (b.is_singleton() && !b.has_hrep()) return intersect(b, a, tol);
    const Polytope ah = a.has_hrep() ? a : to_hrep(a, tol);
    const Polytope bh = b.has_hrep() ? b : to_hrep(b, tol);
    Matrix H(ah.H().rows() + bh.H().rows(), a.dim());
    H << ah.H(), bh.H();
    Vector h(H.rows());
    h << ah.h(), bh.h();
    return vertices_of(Polytope::from_halfspaces(H, h), tol);
}

Polytope linear_map(const Matrix& M, const Polytope& p) {
    if (M.cols() != p.dim()) throw Error(ErrorKind::InvalidInput, "dimension mismatch in linear map");
    return Polytope::from_vertices(M * p.vertices(), 0.0);
}

namespace {

// Volume of a full-dimensional point cloud in R^n via facet decomposition
// around the centroid: vol = (1/n) * sum_f dist(c, f) * area(f).
double volume_of(const Matrix& V, const Tolerances& tol) {
    const Eigen::Index n = V.rows();
    if (n == 1) return V.maxCoeff() - V.minCoeff();
    const Polytope P = to_hrep(Polytope::from_vertices(V, tol.geom_tol), tol);
    return volume(P, tol);
}

}  // namespace

double volume(const Polytope& p, const Tolerances& tol) {
    const Polytope P = (p.has_vrep() && p.has_hrep()) ? p : to_vrep(to_hrep(p, tol), tol);
    const Matrix& V = P.vertices();
    const Eigen::Index n = V.rows();
    if (n == 1) return V.maxCoeff() - V.minCoeff();
    const Vector c = V.rowwise().mean();
    const double scale = V.lpNorm<Eigen::Infinity>();
    double vol = 0.0;
    for (Eigen::Index i = 0; i < P.H().rows(); ++i) {
        const Vector a = P.H().row(i).transpose();
        const double an = a.norm();
        const double dist = (P.h()[i] - a.dot(c)) / an;
        std::vector<Eigen::Index> tight;
        for (Eigen::Index k = 0; k < V.cols(); ++k) {
            if (std::abs(a.dot(V.col(k)) - P.h()[i]) <= tight_tol(tol, scale) * an) tight.push_back(k);
        }
        if (static_cast<Eigen::Index>(tight.size()) < n) continue;
        // Orthonormal basis of the facet hyperplane.
        Eigen::HouseholderQR<Matrix> qr(a / an);
        const Matrix Q = qr.householderQ();
        const Matrix basis = Q.rightCols(n - 1);
        Matrix F(n - 1, static_cast<Eigen::Index>(tight.size()));
        for (std::size_t k = 0; k < tight.size(); ++k) F.col(static_cast<Eigen::Index>(k)) = basis.transpose() * V.col(tight[k]);
        vol += dist * volume_of(F, tol) / static_cast<double>(n);
    }
    return vol;
}

std::pair<Vector, double> chebyshev_center(const Polytope& p) {
    const Matrix& H = p.H();
    const Vector& h = p.h();
    const int n = p.dim();
    lp::Problem prob;
    for (int k = 0; k < n; ++k) prob.add_var();
    const int r = prob.add_var(0.0, lp::kInf, -1.0);
    for (Eigen::Index i = 0; i < H.rows(); ++i) {
        std::vector<lp::Term> row;
        for (int k = 0; k < n; ++k) row.push_back({k, H(i, k)});
        row.push_back({r, H.row(i).norm()});
        prob.add_le(row, h[i]);
    }
    const lp::Solution s = lp::DenseSimplex().solve(prob);
    if (s.status == lp::Status::Unbounded) throw Error(ErrorKind::Unbounded, "Chebyshev ball is unbounded");
    if (s.status != lp::Status::Optimal) throw Error(ErrorKind::DegenerateSet, "polytope is empty");
    Vector c(n);
    for (int k = 0; k < n; ++k) c[k] = s.x[static_cast<std::size_t>(k)];
    return {c, s.x[static_cast<std::size_t>(r)]};
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json matrix_rows(const Matrix& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        nlohmann::json r = nlohmann::json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
        rows.push_back(std::move(r));
    }
    return rows;
}

Matrix rows_matrix(const nlohmann::json& j, Eigen::Index cols) {
    Matrix M(static_cast<Eigen::Index>(j.size()), cols);
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (static_cast<Eigen::Index>(j[i].size()) != cols) throw Error(ErrorKind::InvalidInput, "ragged matrix in JSON");
        for (Eigen::Index k = 0; k < cols; ++k) M(static_cast<Eigen::Index>(i), k) = j[i][static_cast<std::size_t>(k)].get<double>();
    }
    return M;
}

}  // namespace

void to_json(nlohmann::json& j, const Polytope& p) {
    j = nlohmann::json::object();
    j["dim"] = p.dim();
    if (p.has_vrep()) j["vertices"] = matrix_rows(p.vertices().transpose());
    if (p.has_hrep()) {
        j["H"] = matrix_rows(p.H());
        j["h"] = std::vector<double>(p.h().data(), p.h().data() + p.h().size());
    }
}

void from_json(const nlohmann::json& j, Polytope& p) {
    const Eigen::Index n = j.at("dim").get<int>();
    if (n <= 0) throw Error(ErrorKind::InvalidInput, "polytope dimension must be positive");
    const bool has_v = j.contains("vertices");
    const bool has_h = j.contains("H") && j.contains("h");
    if (!has_v && !has_h) throw Error(ErrorKind::InvalidInput, "polytope JSON needs vertices or H/h");
    Matrix V, H;
    Vector h;
    if (has_v) V = rows_matrix(j["vertices"], n).transpose();
    if (has_h) {
        H = rows_matrix(j["H"], n);
        const auto hv = j["h"].get<std::vector<double>>();
        if (static_cast<Eigen::Index>(hv.size()) != H.rows()) throw Error(ErrorKind::InvalidInput, "H and h sizes differ");
        h = Eigen::Map<const Vector>(hv.data(), static_cast<Eigen::Index>(hv.size()));
    }
    if (has_v && has_h) p = Polytope::from_both(V, H, h);
    else if (has_v) p = Polytope::from_vertices(V, 0.0);
    else p = Polytope::from_halfspaces(H, h);
}

}  // namespace hptmpc
