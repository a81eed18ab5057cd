#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fg/env/env.hpp"
#include "fg/nn/network.hpp"
#include "fg/nn/softmax.hpp"

namespace fg::policy {

using env::Frame;
using nn::ActionDist;

inline constexpr std::size_t kStackDepth = 4;

// The m most recent frames, oldest first.
struct FrameStack {
    std::array<Frame, kStackDepth> frames;

    // Episode start: every slot holds the first frame.
    static FrameStack filled(const Frame& first);
    // Drops the oldest frame and appends `next` as the newest.
    FrameStack pushed(const Frame& next) const;
    // Same history, different newest frame.
    FrameStack with_newest(const Frame& newest) const;
    const Frame& newest() const { return frames.back(); }
    friend bool operator==(const FrameStack&, const FrameStack&) = default;
};

// Per-pixel mean frame of a random-policy rollout.
struct PixelStats {
    std::array<float, env::kPixels> mean{};
};

PixelStats compute_pixel_stats(env::EnvKind kind, std::size_t frames, std::uint64_t seed);

// x - mean, written to out (256 values).
void preprocess(const Frame& frame, const PixelStats& stats, std::span<float> out);
nn::Tensor preprocess(const Frame& frame, const PixelStats& stats);
Frame unpreprocess(std::span<const float> values, const PixelStats& stats);

struct PolicyModel {
    env::EnvKind env = env::EnvKind::pong_lite;
    std::size_t action_count = 0;
    PixelStats stats;
    nn::Network q_network;  // input [4 x 16 x 16], output [action_count]

    // Preprocessed network input for a stack (1024 values).
    std::vector<float> input(const FrameStack& stack) const;
};

nn::Tensor q_values(const PolicyModel& policy, const FrameStack& stack);
ActionDist action_distribution(const PolicyModel& policy, const FrameStack& stack, double temperature = 1.0);
std::size_t greedy_action(const PolicyModel& policy, const FrameStack& stack);

enum class SelectMode { greedy, epsilon, sample };

struct Selection {
    SelectMode mode = SelectMode::greedy;
    double epsilon = 0.0;
};

std::size_t select_action(const ActionDist& dist, Selection selection, nn::Rng& rng);

// Episode returns of greedy play, one episode per derived seed.
std::vector<double> evaluate_greedy(const PolicyModel& policy, std::size_t episodes, std::uint64_t seed);
// Same with uniformly random actions; the untrained-policy reference.
std::vector<double> evaluate_random(env::EnvKind kind, std::size_t episodes, std::uint64_t seed);

void save_policy(const std::string& path, const PolicyModel& policy,
                 const std::map<std::string, std::string>& config_echo = {});
PolicyModel load_policy(const std::string& path);

}  // namespace fg::policy
