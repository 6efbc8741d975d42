#include "hptmpc/kernels.hpp"

#include <algorithm>
#include <limits>

namespace hptmpc::kernels {
namespace {

double dot_row(const double* H, std::size_t rows, std::size_t dim, std::size_t r, const double* x) {
    double acc = 0.0;
    for (std::size_t c = 0; c < dim; ++c) acc += H[c * rows + r] * x[c];
    return acc;
}

double max_ratio_scalar(const double* H, const double* h, std::size_t rows, std::size_t dim,
                        const double* x) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < rows; ++r) best = std::max(best, dot_row(H, rows, dim, r, x) / h[r]);
    return best;
}

double max_excess_scalar(const double* H, const double* h, std::size_t rows, std::size_t dim,
                         const double* x) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < rows; ++r) best = std::max(best, dot_row(H, rows, dim, r, x) - h[r]);
    return best;
}

void row_dots_scalar(const double* H, std::size_t rows, std::size_t dim, const double* x,
                     double* out) {
    for (std::size_t r = 0; r < rows; ++r) out[r] = dot_row(H, rows, dim, r, x);
}

constexpr KernelTable kScalar{Isa::Scalar, &max_ratio_scalar, &max_excess_scalar,
                              &row_dots_scalar};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace hptmpc::kernels
