#include "fg/nn/optim.hpp"

#include <cmath>

#include "fg/error.hpp"
#include "fg/simd/kernels.hpp"

namespace fg::nn {

AdamState make_adam_state(std::span<Tensor* const> params) {
    AdamState s;
    for (const Tensor* p : params) {
        s.m.emplace_back(p->shape());
        s.v.emplace_back(p->shape());
    }
    return s;
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state, float lr) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw Error("adam: parameter, gradient and state counts differ");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i]->shape() != grads[i].shape()) {
            throw Error("adam: gradient " + std::to_string(i) + " has shape " + shape_string(grads[i].shape()) +
                        ", parameter has " + shape_string(params[i]->shape()));
        }
        if (!grads[i].all_finite()) throw DivergenceError("adam: non-finite gradient in tensor " + std::to_string(i));
    }
    state.timestep += 1;
    const double t = static_cast<double>(state.timestep);
    simd::AdamCoeffs c{};
    c.lr = lr;
    c.beta1 = state.beta1;
    c.beta2 = state.beta2;
    c.eps = state.eps;
    c.inv_bias1 = static_cast<float>(1.0 / (1.0 - std::pow(static_cast<double>(state.beta1), t)));
    c.inv_bias2 = static_cast<float>(1.0 / (1.0 - std::pow(static_cast<double>(state.beta2), t)));
    const auto& k = simd::active();
    for (std::size_t i = 0; i < params.size(); ++i) {
        k.adam_update(params[i]->data(), grads[i].data(), state.m[i].data(), state.v[i].data(), c,
                      params[i]->size());
    }
}

}  // namespace fg::nn
