#pragma once

#include <string>

#include "fg/env/env.hpp"
#include "fg/nn/rng.hpp"
#include "fg/policy/policy.hpp"

namespace fgt {

using fg::env::Frame;

inline Frame random_frame(fg::nn::Rng& rng) {
    Frame f;
    for (auto& p : f.px) p = static_cast<float>(rng.uniform());
    return f;
}

// Binary-valued frame like the environments emit.
inline Frame sparse_frame(fg::nn::Rng& rng, double density = 0.05) {
    Frame f;
    for (auto& p : f.px) p = rng.bernoulli(density) ? 1.0f : 0.0f;
    return f;
}

inline fg::policy::FrameStack random_stack(fg::nn::Rng& rng) {
    fg::policy::FrameStack s;
    for (auto& f : s.frames) f = random_frame(rng);
    return s;
}

// Random-weight policy with a flat mean frame of 0.1.
inline fg::policy::PolicyModel random_policy(std::uint64_t seed, const std::string& hidden = "affine:32,relu",
                                             fg::env::EnvKind kind = fg::env::EnvKind::pong_lite) {
    fg::policy::PolicyModel p;
    p.env = kind;
    p.action_count = fg::env::action_count(kind);
    p.stats.mean.fill(0.1f);
    fg::nn::Rng rng(seed);
    p.q_network = fg::nn::build_network({4, 16, 16}, hidden + ",affine:" + std::to_string(p.action_count), rng);
    return p;
}

inline std::string temp_dir(const std::string& name) {
    return std::string("/tmp/fg_test_") + name;
}

}  // namespace fgt
