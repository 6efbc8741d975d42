#pragma once

// Halfspace evaluation kernels. Every polytope query in the library (gauges,
// inclusion tests, certificates, tube verification) reduces to evaluating
// H * x against h for one or many points, so these loops are kept in one
// place with a scalar reference and an AVX2 variant selected at runtime.
//
// Layout: H is column-major with `rows` rows and `dim` columns (the Eigen
// default), so column c occupies H[c * rows .. c * rows + rows).

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace hptmpc::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa);

struct KernelTable {
    Isa isa;
    /// max_r (H_r . x) / h_r. Caller guarantees h_r > 0.
    double (*max_ratio)(const double* H, const double* h, std::size_t rows, std::size_t dim,
                        const double* x);
    /// max_r (H_r . x - h_r).
    double (*max_excess)(const double* H, const double* h, std::size_t rows, std::size_t dim,
                         const double* x);
    /// out_r = H_r . x
    void (*row_dots)(const double* H, std::size_t rows, std::size_t dim, const double* x,
                     double* out);
};

const KernelTable& scalar_table();
/// Null when the binary was built without AVX2 support.
const KernelTable* avx2_table();

/// Kernels the running CPU can execute, scalar first.
std::vector<Isa> available();

/// Table chosen at first use: the widest ISA the CPU supports, unless the
/// environment variable HPTMPC_ISA=scalar forces the reference path.
const KernelTable& active();

/// Overrides the active table (tests and benchmarks). Throws if unsupported.
void select(Isa isa);

const KernelTable& table(Isa isa);

// Convenience wrappers over the active table.
double max_ratio(std::span<const double> H, std::span<const double> h, std::size_t dim,
                 std::span<const double> x);
double max_excess(std::span<const double> H, std::span<const double> h, std::size_t dim,
                  std::span<const double> x);

}  // namespace hptmpc::kernels
