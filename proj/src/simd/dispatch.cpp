#include "fg/simd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace fg::simd {
namespace {

const KernelTable* select_default() {
    if (const char* env = std::getenv("FG_SIMD")) {
        const std::string want(env);
        if (want == "scalar") return &scalar_kernels();
        if (want == "avx2" && avx2_kernels()) return avx2_kernels();
        if (want == "neon" && neon_kernels()) return neon_kernels();
    }
    if (const KernelTable* t = avx2_kernels()) return t;
    if (const KernelTable* t = neon_kernels()) return t;
    return &scalar_kernels();
}

std::atomic<const KernelTable*>& slot() {
    static std::atomic<const KernelTable*> table{select_default()};
    return table;
}

}  // namespace

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::neon: return "neon";
    }
    return "unknown";
}

const KernelTable& active() { return *slot().load(std::memory_order_relaxed); }

bool force_isa(Isa isa) {
    const KernelTable* t = nullptr;
    switch (isa) {
        case Isa::scalar: t = &scalar_kernels(); break;
        case Isa::avx2: t = avx2_kernels(); break;
        case Isa::neon: t = neon_kernels(); break;
    }
    if (!t) return false;
    slot().store(t, std::memory_order_relaxed);
    return true;
}

}  // namespace fg::simd
