#include "fg/simd/kernels.hpp"

#include <cmath>

namespace fg::simd {
namespace {

// Same operand semantics as maxps/minps so the tails agree with the vector body.
inline float vmax(float a, float b) { return a > b ? a : b; }
inline float vmin(float a, float b) { return a < b ? a : b; }

float dot_scalar(const float* a, const float* b, std::size_t n) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_scalar(float alpha, const float* x, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void multiply_scalar(const float* a, const float* b, float* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void relu_forward_scalar(const float* x, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward_scalar(const float* x, const float* dy, float* dx, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
}

void signed_step_scalar(const float* origin, const float* current, const float* grad,
                        float step, float eps, float* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const float s = grad[i] > 0.0f ? 1.0f : (grad[i] < 0.0f ? -1.0f : 0.0f);
        float v = current[i] + step * s;
        v = vmin(vmax(v, origin[i] - eps), origin[i] + eps);
        out[i] = vmin(vmax(v, 0.0f), 1.0f);
    }
}

void adam_update_scalar(float* param, const float* grad, float* m, float* v,
                        const AdamCoeffs& c, std::size_t n) {
    const float one_m_b1 = 1.0f - c.beta1;
    const float one_m_b2 = 1.0f - c.beta2;
    for (std::size_t i = 0; i < n; ++i) {
        const float g = grad[i];
        m[i] = c.beta1 * m[i] + one_m_b1 * g;
        v[i] = c.beta2 * v[i] + one_m_b2 * (g * g);
        const float mhat = m[i] * c.inv_bias1;
        const float vhat = v[i] * c.inv_bias2;
        param[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
}

double squared_error_scalar(const float* a, const float* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return acc;
}

constexpr KernelTable kScalar{
    Isa::scalar,          dot_scalar,         axpy_scalar,
    multiply_scalar,      relu_forward_scalar, relu_backward_scalar,
    signed_step_scalar,   adam_update_scalar, squared_error_scalar,
};

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

}  // namespace fg::simd
