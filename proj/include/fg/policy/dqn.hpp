#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fg/nn/rng.hpp"
#include "fg/policy/policy.hpp"

namespace fg::policy {

struct DQNConfig {
    // Hidden layers; an affine head sized to the action count is appended.
    std::string layers = "affine:128,relu";
    std::size_t replay_capacity = 50000;
    std::size_t batch_size = 32;
    double gamma = 0.99;
    std::size_t target_sync = 1000;  // env steps between target-network copies
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    std::size_t epsilon_decay_steps = 30000;
    std::size_t training_steps = 100000;
    std::size_t learn_start = 1000;
    std::size_t train_every = 2;
    float learning_rate = 5e-4f;
    std::size_t stats_frames = 10000;
    std::uint64_t seed = 1;

    void validate() const;
    std::map<std::string, std::string> echo() const;
};

struct TrainingCurve {
    std::vector<double> episode_returns;
    double best_return = 0.0;  // max single-episode return seen while training
    std::size_t updates = 0;
};

struct DQNResult {
    PolicyModel model;
    TrainingCurve curve;
};

// Uniform replay over (stack, action, reward, next frame, terminal) stored as bytes.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void add(const FrameStack& stack, std::size_t action, double reward, const Frame& next, bool terminal);
    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }
    // Uniformly random slot index in [0, size()).
    std::size_t sample_index(nn::Rng& rng) const;

    FrameStack state(std::size_t i) const;
    FrameStack next_state(std::size_t i) const;
    std::size_t action(std::size_t i) const { return actions_[i]; }
    double reward(std::size_t i) const { return rewards_[i]; }
    bool terminal(std::size_t i) const { return terminals_[i] != 0; }

private:
    std::size_t capacity_;
    std::size_t size_ = 0;
    std::size_t head_ = 0;
    std::vector<std::uint8_t> frames_;  // 5 frames per slot: 4 stack + next
    std::vector<std::uint8_t> actions_;
    std::vector<float> rewards_;
    std::vector<std::uint8_t> terminals_;
};

// Linear epsilon decay from start to end over decay_steps.
double epsilon_at(const DQNConfig& config, std::size_t step);

// Observation points for tests; all optional.
struct DQNHooks {
    std::function<void(std::size_t step, const nn::Network& online, const nn::Network& target)> on_target_sync;
    std::function<void(std::size_t step, const ReplayBuffer& buffer)> on_step;
};

DQNResult train_dqn(env::EnvKind kind, const DQNConfig& config, const DQNHooks& hooks = {});

}  // namespace fg::policy
