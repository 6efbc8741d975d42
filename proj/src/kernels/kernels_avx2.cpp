// Compiled with -mavx2 only (no FMA contraction) so every row sum is formed
// with the same multiply/add sequence as the scalar reference and results are
// bitwise identical.

#include "hptmpc/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <limits>

namespace hptmpc::kernels {
namespace {

inline __m256d dot4(const double* H, std::size_t rows, std::size_t dim, std::size_t r,
                    const double* x) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t c = 0; c < dim; ++c) {
        const __m256d col = _mm256_loadu_pd(H + c * rows + r);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(col, _mm256_set1_pd(x[c])));
    }
    return acc;
}

inline double dot1(const double* H, std::size_t rows, std::size_t dim, std::size_t r,
                   const double* x) {
    double acc = 0.0;
    for (std::size_t c = 0; c < dim; ++c) acc += H[c * rows + r] * x[c];
    return acc;
}

inline double hmax(__m256d v) {
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, v);
    return std::max(std::max(lanes[0], lanes[1]), std::max(lanes[2], lanes[3]));
}

double max_ratio_avx2(const double* H, const double* h, std::size_t rows, std::size_t dim,
                      const double* x) {
    const double ninf = -std::numeric_limits<double>::infinity();
    __m256d best = _mm256_set1_pd(ninf);
    std::size_t r = 0;
    for (; r + 4 <= rows; r += 4) {
        const __m256d q = _mm256_div_pd(dot4(H, rows, dim, r, x), _mm256_loadu_pd(h + r));
        best = _mm256_max_pd(best, q);
    }
    double out = rows >= 4 ? hmax(best) : ninf;
    for (; r < rows; ++r) out = std::max(out, dot1(H, rows, dim, r, x) / h[r]);
    return out;
}

double max_excess_avx2(const double* H, const double* h, std::size_t rows, std::size_t dim,
                       const double* x) {
    const double ninf = -std::numeric_limits<double>::infinity();
    __m256d best = _mm256_set1_pd(ninf);
    std::size_t r = 0;
    for (; r + 4 <= rows; r += 4) {
        const __m256d e = _mm256_sub_pd(dot4(H, rows, dim, r, x), _mm256_loadu_pd(h + r));
        best = _mm256_max_pd(best, e);
    }
    double out = rows >= 4 ? hmax(best) : ninf;
    for (; r < rows; ++r) out = std::max(out, dot1(H, rows, dim, r, x) - h[r]);
    return out;
}

void row_dots_avx2(const double* H, std::size_t rows, std::size_t dim, const double* x,
                   double* out) {
    std::size_t r = 0;
    for (; r + 4 <= rows; r += 4) _mm256_storeu_pd(out + r, dot4(H, rows, dim, r, x));
    for (; r < rows; ++r) out[r] = dot1(H, rows, dim, r, x);
}

constexpr KernelTable kAvx2{Isa::Avx2, &max_ratio_avx2, &max_excess_avx2, &row_dots_avx2};

}  // namespace

const KernelTable* avx2_table() { return &kAvx2; }

}  // namespace hptmpc::kernels
