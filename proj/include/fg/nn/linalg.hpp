#pragma once

#include <cstddef>

namespace fg::nn {

// Batched affine map: y[b] = W x[b] + bias, with W stored row-major [out x in].
// bias may be null.
void affine_forward(const float* x, const float* w, const float* bias, float* y,
                    std::size_t batch, std::size_t in, std::size_t out);

// Accumulating backward pass of affine_forward. Any of dx, dw, db may be null.
// dx is overwritten; dw and db are accumulated into.
void affine_backward(const float* x, const float* w, const float* dy, float* dx, float* dw, float* db,
                     std::size_t batch, std::size_t in, std::size_t out);

struct ConvGeometry {
    std::size_t channels, height, width;
    std::size_t kernel, stride, pad;
    std::size_t out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
    std::size_t out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
    std::size_t patch() const { return channels * kernel * kernel; }
    std::size_t positions() const { return out_height() * out_width(); }
};

// img [C x H x W] -> cols [positions x patch]; out-of-image taps read zero.
void im2col(const ConvGeometry& g, const float* img, float* cols);
// Adjoint of im2col: accumulates cols back into img (img must be pre-zeroed).
void col2im(const ConvGeometry& g, const float* cols, float* img);

}  // namespace fg::nn
