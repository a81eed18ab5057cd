#include "fg/policy/dqn.hpp"

#include <algorithm>
#include <cmath>

#include "fg/error.hpp"
#include "fg/nn/optim.hpp"

namespace fg::policy {
namespace {

constexpr std::size_t kSlotFrames = kStackDepth + 1;

std::uint8_t to_byte(float v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)); }

void write_frame(const Frame& f, std::uint8_t* dst) {
    for (std::size_t i = 0; i < env::kPixels; ++i) dst[i] = to_byte(f.px[i]);
}

Frame read_frame(const std::uint8_t* src) {
    Frame f;
    for (std::size_t i = 0; i < env::kPixels; ++i) f.px[i] = static_cast<float>(src[i]) / 255.0f;
    return f;
}

}  // namespace

void DQNConfig::validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error("dqn config: gamma must be in [0, 1]");
    if (replay_capacity == 0 || batch_size == 0 || target_sync == 0 || train_every == 0 ||
        epsilon_decay_steps == 0 || stats_frames == 0) {
        throw Error("dqn config: counts must be positive");
    }
    if (epsilon_start < 0 || epsilon_start > 1 || epsilon_end < 0 || epsilon_end > 1) {
        throw Error("dqn config: epsilon schedule must lie in [0, 1]");
    }
    if (!(learning_rate >= 0.0f)) throw Error("dqn config: learning rate must be non-negative");
}

std::map<std::string, std::string> DQNConfig::echo() const {
    return {
        {"layers", layers},
        {"replay_capacity", std::to_string(replay_capacity)},
        {"batch_size", std::to_string(batch_size)},
        {"gamma", std::to_string(gamma)},
        {"target_sync", std::to_string(target_sync)},
        {"epsilon_start", std::to_string(epsilon_start)},
        {"epsilon_end", std::to_string(epsilon_end)},
        {"epsilon_decay_steps", std::to_string(epsilon_decay_steps)},
        {"training_steps", std::to_string(training_steps)},
        {"learn_start", std::to_string(learn_start)},
        {"train_every", std::to_string(train_every)},
        {"learning_rate", std::to_string(learning_rate)},
        {"stats_frames", std::to_string(stats_frames)},
        {"seed", std::to_string(seed)},
    };
}

ReplayBuffer::ReplayBuffer(std::size_t capacity)
    : capacity_(capacity),
      frames_(capacity * kSlotFrames * env::kPixels),
      actions_(capacity),
      rewards_(capacity),
      terminals_(capacity) {
    if (capacity == 0) throw Error("replay buffer: capacity must be positive");
}

void ReplayBuffer::add(const FrameStack& stack, std::size_t action, double reward, const Frame& next,
                       bool terminal) {
    std::uint8_t* slot = frames_.data() + head_ * kSlotFrames * env::kPixels;
    for (std::size_t k = 0; k < kStackDepth; ++k) write_frame(stack.frames[k], slot + k * env::kPixels);
    write_frame(next, slot + kStackDepth * env::kPixels);
    actions_[head_] = static_cast<std::uint8_t>(action);
    rewards_[head_] = static_cast<float>(reward);
    terminals_[head_] = terminal ? 1 : 0;
    head_ = (head_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);
}

std::size_t ReplayBuffer::sample_index(nn::Rng& rng) const {
    if (size_ == 0) throw Error("replay buffer: sampling from an empty buffer");
    return rng.below(size_);
}

FrameStack ReplayBuffer::state(std::size_t i) const {
    const std::uint8_t* slot = frames_.data() + i * kSlotFrames * env::kPixels;
    FrameStack s;
    for (std::size_t k = 0; k < kStackDepth; ++k) s.frames[k] = read_frame(slot + k * env::kPixels);
    return s;
}

FrameStack ReplayBuffer::next_state(std::size_t i) const {
    const std::uint8_t* slot = frames_.data() + i * kSlotFrames * env::kPixels;
    FrameStack s;
    for (std::size_t k = 0; k < kStackDepth; ++k) s.frames[k] = read_frame(slot + (k + 1) * env::kPixels);
    return s;
}

double epsilon_at(const DQNConfig& config, std::size_t step) {
    if (step >= config.epsilon_decay_steps) return config.epsilon_end;
    const double frac = static_cast<double>(step) / static_cast<double>(config.epsilon_decay_steps);
    return config.epsilon_start + frac * (config.epsilon_end - config.epsilon_start);
}

DQNResult train_dqn(env::EnvKind kind, const DQNConfig& config, const DQNHooks& hooks) {
    config.validate();
    const std::size_t actions = env::action_count(kind);

    DQNResult result;
    PolicyModel& model = result.model;
    model.env = kind;
    model.action_count = actions;
    model.stats = compute_pixel_stats(kind, config.stats_frames, nn::derive_seed(config.seed, 1));
    {
        nn::Rng init_rng(nn::derive_seed(config.seed, 2));
        const std::string spec =
            (config.layers.empty() ? "" : config.layers + ",") + "affine:" + std::to_string(actions);
        model.q_network = nn::build_network({kStackDepth, env::kSide, env::kSide}, spec, init_rng);
    }
    if (model.q_network.output_size() != actions) {
        throw Error("dqn: network output " + std::to_string(model.q_network.output_size()) + " != action count " +
                    std::to_string(actions));
    }

    nn::Network target = model.q_network;
    auto params = model.q_network.params();
    nn::AdamState adam = nn::make_adam_state(params);
    std::vector<nn::Tensor> grads = model.q_network.make_gradients();

    nn::Rng act_rng(nn::derive_seed(config.seed, 3));
    nn::Rng replay_rng(nn::derive_seed(config.seed, 4));
    ReplayBuffer buffer(config.replay_capacity);

    const std::size_t batch = config.batch_size;
    const std::size_t in_size = model.q_network.input_size();
    std::vector<float> xs(batch * in_size), xn(batch * in_size), dout(batch * actions);
    std::vector<std::size_t> idx(batch);
    nn::Tape tape, target_tape;

    std::uint64_t episode = 0;
    auto reset = env::env_reset(kind, nn::derive_seed(config.seed, 1000 + episode++));
    env::EnvState state = reset.state;
    FrameStack stack = FrameStack::filled(reset.frame);
    double episode_return = 0.0;
    bool have_best = false;

    for (std::size_t step = 0; step < config.training_steps; ++step) {
        const double eps = epsilon_at(config, step);
        std::size_t action;
        if (act_rng.uniform() < eps) {
            action = act_rng.below(actions);
        } else {
            action = greedy_action(model, stack);
        }
        const env::StepResult sr = env::env_step(state, action);
        const bool terminal = sr.done && state.steps() < env::kEpisodeCap;
        buffer.add(stack, action, sr.reward, sr.frame, terminal);
        episode_return += sr.reward;
        if (sr.done) {
            result.curve.episode_returns.push_back(episode_return);
            if (!have_best || episode_return > result.curve.best_return) result.curve.best_return = episode_return;
            have_best = true;
            episode_return = 0.0;
            reset = env::env_reset(kind, nn::derive_seed(config.seed, 1000 + episode++));
            state = reset.state;
            stack = FrameStack::filled(reset.frame);
        } else {
            stack = stack.pushed(sr.frame);
        }

        if (step >= config.learn_start && step % config.train_every == 0 && buffer.size() >= batch) {
            for (std::size_t b = 0; b < batch; ++b) {
                idx[b] = buffer.sample_index(replay_rng);
                const auto s = model.input(buffer.state(idx[b]));
                const auto n = model.input(buffer.next_state(idx[b]));
                std::copy(s.begin(), s.end(), xs.begin() + static_cast<std::ptrdiff_t>(b * in_size));
                std::copy(n.begin(), n.end(), xn.begin() + static_cast<std::ptrdiff_t>(b * in_size));
            }
            target.forward_batch(xn, batch, target_tape);
            model.q_network.forward_batch(xs, batch, tape);
            const auto qn = target_tape.output();
            const auto q = tape.output();
            std::fill(dout.begin(), dout.end(), 0.0f);
            double loss = 0.0;
            for (std::size_t b = 0; b < batch; ++b) {
                const std::size_t i = idx[b];
                const float best_next = *std::max_element(qn.begin() + static_cast<std::ptrdiff_t>(b * actions),
                                                          qn.begin() + static_cast<std::ptrdiff_t>((b + 1) * actions));
                const double y = buffer.reward(i) + (buffer.terminal(i) ? 0.0 : config.gamma * best_next);
                const double d = static_cast<double>(q[b * actions + buffer.action(i)]) - y;
                const double ad = std::abs(d);
                loss += ad <= 1.0 ? 0.5 * d * d : ad - 0.5;
                dout[b * actions + buffer.action(i)] =
                    static_cast<float>(std::clamp(d, -1.0, 1.0) / static_cast<double>(batch));
            }
            if (!std::isfinite(loss)) {
                throw DivergenceError("dqn: non-finite TD loss at step " + std::to_string(step));
            }
            for (auto& g : grads) g.fill(0.0f);
            model.q_network.backward(tape, dout, grads, {});
            nn::adam_step(params, grads, adam, config.learning_rate);
            result.curve.updates += 1;
        }
        if ((step + 1) % config.target_sync == 0) {
            target = model.q_network;
            if (hooks.on_target_sync) hooks.on_target_sync(step, model.q_network, target);
        }
        if (hooks.on_step) hooks.on_step(step, buffer);
    }
    return result;
}

}  // namespace fg::policy
