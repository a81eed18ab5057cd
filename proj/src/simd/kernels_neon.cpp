#include "fg/simd/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cmath>

namespace fg::simd {
namespace {

inline float vmax(float a, float b) { return a > b ? a : b; }
inline float vmin(float a, float b) { return a < b ? a : b; }

float dot_neon(const float* a, const float* b, std::size_t n) {
    float32x4_t acc0 = vdupq_n_f32(0.0f);
    float32x4_t acc1 = vdupq_n_f32(0.0f);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = vfmaq_f32(acc0, vld1q_f32(a + i), vld1q_f32(b + i));
        acc1 = vfmaq_f32(acc1, vld1q_f32(a + i + 4), vld1q_f32(b + i + 4));
    }
    float acc = vaddvq_f32(vaddq_f32(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_neon(float alpha, const float* x, float* y, std::size_t n) {
    const float32x4_t va = vdupq_n_f32(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        vst1q_f32(y + i, vaddq_f32(vld1q_f32(y + i), vmulq_f32(va, vld1q_f32(x + i))));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void multiply_neon(const float* a, const float* b, float* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(out + i, vmulq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void relu_forward_neon(const float* x, float* y, std::size_t n) {
    const float32x4_t zero = vdupq_n_f32(0.0f);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t v = vld1q_f32(x + i);
        vst1q_f32(y + i, vbslq_f32(vcgtq_f32(v, zero), v, zero));
    }
    for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward_neon(const float* x, const float* dy, float* dx, std::size_t n) {
    const float32x4_t zero = vdupq_n_f32(0.0f);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        vst1q_f32(dx + i, vbslq_f32(vcgtq_f32(vld1q_f32(x + i), zero), vld1q_f32(dy + i), zero));
    }
    for (; i < n; ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
}

// NEON fmax/fmin have different signed-zero rules, so select explicitly.
inline float32x4_t sel_max(float32x4_t a, float32x4_t b) { return vbslq_f32(vcgtq_f32(a, b), a, b); }
inline float32x4_t sel_min(float32x4_t a, float32x4_t b) { return vbslq_f32(vcltq_f32(a, b), a, b); }

void signed_step_neon(const float* origin, const float* current, const float* grad,
                      float step, float eps, float* out, std::size_t n) {
    const float32x4_t zero = vdupq_n_f32(0.0f);
    const float32x4_t one = vdupq_n_f32(1.0f);
    const float32x4_t minus_one = vdupq_n_f32(-1.0f);
    const float32x4_t vstep = vdupq_n_f32(step);
    const float32x4_t veps = vdupq_n_f32(eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t g = vld1q_f32(grad + i);
        float32x4_t s = vbslq_f32(vcgtq_f32(g, zero), one, zero);
        s = vbslq_f32(vcltq_f32(g, zero), minus_one, s);
        float32x4_t v = vaddq_f32(vld1q_f32(current + i), vmulq_f32(vstep, s));
        const float32x4_t o = vld1q_f32(origin + i);
        v = sel_min(sel_max(v, vsubq_f32(o, veps)), vaddq_f32(o, veps));
        vst1q_f32(out + i, sel_min(sel_max(v, zero), one));
    }
    for (; i < n; ++i) {
        const float s = grad[i] > 0.0f ? 1.0f : (grad[i] < 0.0f ? -1.0f : 0.0f);
        float v = current[i] + step * s;
        v = vmin(vmax(v, origin[i] - eps), origin[i] + eps);
        out[i] = vmin(vmax(v, 0.0f), 1.0f);
    }
}

void adam_update_neon(float* param, const float* grad, float* m, float* v,
                      const AdamCoeffs& c, std::size_t n) {
    const float one_m_b1 = 1.0f - c.beta1;
    const float one_m_b2 = 1.0f - c.beta2;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t g = vld1q_f32(grad + i);
        const float32x4_t vm = vaddq_f32(vmulq_n_f32(vld1q_f32(m + i), c.beta1), vmulq_n_f32(g, one_m_b1));
        const float32x4_t vv =
            vaddq_f32(vmulq_n_f32(vld1q_f32(v + i), c.beta2), vmulq_n_f32(vmulq_f32(g, g), one_m_b2));
        vst1q_f32(m + i, vm);
        vst1q_f32(v + i, vv);
        const float32x4_t mhat = vmulq_n_f32(vm, c.inv_bias1);
        const float32x4_t vhat = vmulq_n_f32(vv, c.inv_bias2);
        const float32x4_t upd =
            vdivq_f32(vmulq_n_f32(mhat, c.lr), vaddq_f32(vsqrtq_f32(vhat), vdupq_n_f32(c.eps)));
        vst1q_f32(param + i, vsubq_f32(vld1q_f32(param + i), upd));
    }
    for (; i < n; ++i) {
        const float g = grad[i];
        m[i] = c.beta1 * m[i] + one_m_b1 * g;
        v[i] = c.beta2 * v[i] + one_m_b2 * (g * g);
        const float mhat = m[i] * c.inv_bias1;
        const float vhat = v[i] * c.inv_bias2;
        param[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
}

double squared_error_neon(const float* a, const float* b, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t d = vsubq_f64(vcvt_f64_f32(vld1_f32(a + i)), vcvt_f64_f32(vld1_f32(b + i)));
        acc = vfmaq_f64(acc, d, d);
    }
    double out = vaddvq_f64(acc);
    for (; i < n; ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        out += d * d;
    }
    return out;
}

constexpr KernelTable kNeon{
    Isa::neon,        dot_neon,         axpy_neon,
    multiply_neon,    relu_forward_neon, relu_backward_neon,
    signed_step_neon, adam_update_neon, squared_error_neon,
};

}  // namespace

const KernelTable* neon_kernels() { return &kNeon; }

}  // namespace fg::simd

#else

namespace fg::simd {
const KernelTable* neon_kernels() { return nullptr; }
}  // namespace fg::simd

#endif
