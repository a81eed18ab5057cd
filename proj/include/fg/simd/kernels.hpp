#pragma once
// Data-parallel inner loops used by the network, optimizer and attack code.
//
// Every kernel has a portable scalar reference implementation. Vector variants
// (AVX2+FMA on x86-64, NEON on aarch64) are selected once at startup from the
// CPU feature bits; FG_SIMD=scalar in the environment forces the reference
// path. Elementwise kernels are bit-identical across variants. Reductions
// (dot, squared_error) differ only by summation order.

#include <cstddef>
#include <span>
#include <string_view>

namespace fg::simd {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);

struct AdamCoeffs {
    float lr;
    float beta1;
    float beta2;
    float eps;
    float inv_bias1;  // 1 / (1 - beta1^t)
    float inv_bias2;  // 1 / (1 - beta2^t)
};

struct KernelTable {
    Isa isa;
    float (*dot)(const float* a, const float* b, std::size_t n);
    // y += alpha * x
    void (*axpy)(float alpha, const float* x, float* y, std::size_t n);
    // out = a * b
    void (*multiply)(const float* a, const float* b, float* out, std::size_t n);
    void (*relu_forward)(const float* x, float* y, std::size_t n);
    // dx = x > 0 ? dy : 0
    void (*relu_backward)(const float* x, const float* dy, float* dx, std::size_t n);
    // out = clamp(clamp(current + step * sgn(grad), origin - eps, origin + eps), 0, 1)
    void (*signed_step)(const float* origin, const float* current, const float* grad,
                        float step, float eps, float* out, std::size_t n);
    void (*adam_update)(float* param, const float* grad, float* m, float* v,
                        const AdamCoeffs& c, std::size_t n);
    // sum (a - b)^2 accumulated in double
    double (*squared_error)(const float* a, const float* b, std::size_t n);
};

const KernelTable& scalar_kernels();
// nullptr when the variant was not compiled in or the CPU lacks the feature.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

// The table selected for this process.
const KernelTable& active();
// Test hook: pin the active table. Returns false if the ISA is unavailable.
bool force_isa(Isa isa);

inline float dot(std::span<const float> a, std::span<const float> b) {
    return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(float alpha, std::span<const float> x, std::span<float> y) {
    active().axpy(alpha, x.data(), y.data(), x.size());
}
inline double squared_error(std::span<const float> a, std::span<const float> b) {
    return active().squared_error(a.data(), b.data(), a.size());
}

}  // namespace fg::simd
