#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fg/nn/tensor.hpp"

namespace fg::nn {

struct AdamState {
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    std::uint64_t timestep = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;
};

AdamState make_adam_state(std::span<Tensor* const> params);

// One bias-corrected Adam update. Throws DivergenceError on a non-finite
// gradient, before anything is modified.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state, float lr);

}  // namespace fg::nn
