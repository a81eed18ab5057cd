#include "fg/nn/linalg.hpp"

#include <algorithm>

#include "fg/simd/kernels.hpp"

namespace fg::nn {

void affine_forward(const float* x, const float* w, const float* bias, float* y,
                    std::size_t batch, std::size_t in, std::size_t out) {
    const auto& k = simd::active();
    for (std::size_t o = 0; o < out; ++o) {
        const float* row = w + o * in;
        const float b = bias ? bias[o] : 0.0f;
        for (std::size_t s = 0; s < batch; ++s) y[s * out + o] = k.dot(row, x + s * in, in) + b;
    }
}

void affine_backward(const float* x, const float* w, const float* dy, float* dx, float* dw, float* db,
                     std::size_t batch, std::size_t in, std::size_t out) {
    const auto& k = simd::active();
    if (dx) {
        std::fill(dx, dx + batch * in, 0.0f);
        for (std::size_t s = 0; s < batch; ++s) {
            float* dxs = dx + s * in;
            for (std::size_t o = 0; o < out; ++o) {
                const float g = dy[s * out + o];
                if (g != 0.0f) k.axpy(g, w + o * in, dxs, in);
            }
        }
    }
    if (dw || db) {
        for (std::size_t o = 0; o < out; ++o) {
            float* dwo = dw ? dw + o * in : nullptr;
            float acc = 0.0f;
            for (std::size_t s = 0; s < batch; ++s) {
                const float g = dy[s * out + o];
                acc += g;
                if (dwo && g != 0.0f) k.axpy(g, x + s * in, dwo, in);
            }
            if (db) db[o] += acc;
        }
    }
}

void im2col(const ConvGeometry& g, const float* img, float* cols) {
    const std::size_t oh = g.out_height(), ow = g.out_width(), patch = g.patch();
    for (std::size_t r = 0; r < oh; ++r) {
        for (std::size_t c = 0; c < ow; ++c) {
            float* dst = cols + (r * ow + c) * patch;
            for (std::size_t ch = 0; ch < g.channels; ++ch) {
                for (std::size_t ki = 0; ki < g.kernel; ++ki) {
                    const long y = static_cast<long>(r * g.stride + ki) - static_cast<long>(g.pad);
                    for (std::size_t kj = 0; kj < g.kernel; ++kj) {
                        const long x = static_cast<long>(c * g.stride + kj) - static_cast<long>(g.pad);
                        const bool inside = y >= 0 && x >= 0 && y < static_cast<long>(g.height) &&
                                            x < static_cast<long>(g.width);
                        *dst++ = inside ? img[(ch * g.height + y) * g.width + x] : 0.0f;
                    }
                }
            }
        }
    }
}

void col2im(const ConvGeometry& g, const float* cols, float* img) {
    const std::size_t oh = g.out_height(), ow = g.out_width(), patch = g.patch();
    for (std::size_t r = 0; r < oh; ++r) {
        for (std::size_t c = 0; c < ow; ++c) {
            const float* src = cols + (r * ow + c) * patch;
            for (std::size_t ch = 0; ch < g.channels; ++ch) {
                for (std::size_t ki = 0; ki < g.kernel; ++ki) {
                    const long y = static_cast<long>(r * g.stride + ki) - static_cast<long>(g.pad);
                    for (std::size_t kj = 0; kj < g.kernel; ++kj) {
                        const long x = static_cast<long>(c * g.stride + kj) - static_cast<long>(g.pad);
                        const float v = *src++;
                        if (y >= 0 && x >= 0 && y < static_cast<long>(g.height) && x < static_cast<long>(g.width)) {
                            img[(ch * g.height + y) * g.width + x] += v;
                        }
                    }
                }
            }
        }
    }
}

}  // namespace fg::nn
