#include <atomic>
#include <cstdlib>
#include <string>

#include "hptmpc/errors.hpp"
#include "hptmpc/kernels.hpp"

namespace hptmpc::kernels {

#ifndef HPTMPC_NO_AVX2
// Defined in kernels_avx2.cpp.
#else
const KernelTable* avx2_table() { return nullptr; }
#endif

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

const KernelTable* pick_default() {
    if (const char* env = std::getenv("HPTMPC_ISA"); env && std::string(env) == "scalar") {
        return &scalar_table();
    }
    if (avx2_table() && cpu_has_avx2()) return avx2_table();
    return &scalar_table();
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> table{pick_default()};
    return table;
}

}  // namespace

std::string_view to_string(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
    }
    return "unknown";
}

std::vector<Isa> available() {
    std::vector<Isa> out{Isa::Scalar};
    if (avx2_table() && cpu_has_avx2()) out.push_back(Isa::Avx2);
    return out;
}

const KernelTable& table(Isa isa) {
    if (isa == Isa::Scalar) return scalar_table();
    if (avx2_table() && cpu_has_avx2()) return *avx2_table();
    throw Error(ErrorKind::InvalidInput, "kernel ISA not supported on this CPU: " +
                                             std::string(to_string(isa)));
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void select(Isa isa) { current().store(&table(isa), std::memory_order_release); }

double max_ratio(std::span<const double> H, std::span<const double> h, std::size_t dim,
                 std::span<const double> x) {
    return active().max_ratio(H.data(), h.data(), h.size(), dim, x.data());
}

double max_excess(std::span<const double> H, std::span<const double> h, std::size_t dim,
                  std::span<const double> x) {
    return active().max_excess(H.data(), h.data(), h.size(), dim, x.data());
}

}  // namespace hptmpc::kernels
