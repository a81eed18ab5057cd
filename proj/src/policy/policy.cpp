#include "fg/policy/policy.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "fg/error.hpp"
#include "fg/nn/serialize.hpp"

namespace fg::policy {

FrameStack FrameStack::filled(const Frame& first) {
    FrameStack s;
    s.frames.fill(first);
    return s;
}

FrameStack FrameStack::pushed(const Frame& next) const {
    FrameStack s;
    for (std::size_t i = 0; i + 1 < kStackDepth; ++i) s.frames[i] = frames[i + 1];
    s.frames.back() = next;
    return s;
}

FrameStack FrameStack::with_newest(const Frame& newest) const {
    FrameStack s = *this;
    s.frames.back() = newest;
    return s;
}

PixelStats compute_pixel_stats(env::EnvKind kind, std::size_t frames, std::uint64_t seed) {
    if (frames == 0) throw Error("pixel stats: need at least one frame");
    nn::Rng rng(seed);
    std::array<double, env::kPixels> acc{};
    std::uint64_t episode = 0;
    auto reset = env::env_reset(kind, nn::derive_seed(seed, episode++));
    env::EnvState state = reset.state;
    Frame frame = reset.frame;
    for (std::size_t n = 0; n < frames; ++n) {
        for (std::size_t i = 0; i < env::kPixels; ++i) acc[i] += frame.px[i];
        if (state.done()) {
            reset = env::env_reset(kind, nn::derive_seed(seed, episode++));
            state = reset.state;
            frame = reset.frame;
        } else {
            frame = env::env_step(state, rng.below(env::action_count(kind))).frame;
        }
    }
    PixelStats s;
    for (std::size_t i = 0; i < env::kPixels; ++i) s.mean[i] = static_cast<float>(acc[i] / static_cast<double>(frames));
    return s;
}

void preprocess(const Frame& frame, const PixelStats& stats, std::span<float> out) {
    if (out.size() != env::kPixels) throw Error("preprocess: output must hold 256 values");
    for (std::size_t i = 0; i < env::kPixels; ++i) out[i] = frame.px[i] - stats.mean[i];
}

nn::Tensor preprocess(const Frame& frame, const PixelStats& stats) {
    nn::Tensor t({1, static_cast<std::size_t>(env::kSide), static_cast<std::size_t>(env::kSide)});
    preprocess(frame, stats, t.values());
    return t;
}

Frame unpreprocess(std::span<const float> values, const PixelStats& stats) {
    if (values.size() != env::kPixels) throw Error("unpreprocess: expected 256 values");
    Frame f;
    for (std::size_t i = 0; i < env::kPixels; ++i) f.px[i] = values[i] + stats.mean[i];
    return f;
}

std::vector<float> PolicyModel::input(const FrameStack& stack) const {
    std::vector<float> x(kStackDepth * env::kPixels);
    for (std::size_t k = 0; k < kStackDepth; ++k) {
        preprocess(stack.frames[k], stats, std::span<float>(x).subspan(k * env::kPixels, env::kPixels));
    }
    return x;
}

nn::Tensor q_values(const PolicyModel& policy, const FrameStack& stack) {
    return policy.q_network.forward(nn::Tensor(policy.q_network.input_shape(), policy.input(stack)));
}

ActionDist action_distribution(const PolicyModel& policy, const FrameStack& stack, double temperature) {
    const nn::Tensor q = q_values(policy, stack);
    return nn::softmax_temp(q.values(), temperature);
}

std::size_t greedy_action(const PolicyModel& policy, const FrameStack& stack) {
    return action_distribution(policy, stack).argmax();
}

std::size_t select_action(const ActionDist& dist, Selection selection, nn::Rng& rng) {
    switch (selection.mode) {
        case SelectMode::greedy: return dist.argmax();
        case SelectMode::epsilon:
            if (rng.uniform() < selection.epsilon) return rng.below(dist.size());
            return dist.argmax();
        case SelectMode::sample: {
            const double u = rng.uniform();
            double acc = 0.0;
            for (std::size_t i = 0; i < dist.size(); ++i) {
                acc += dist.probs[i];
                if (u < acc) return i;
            }
            return dist.size() - 1;
        }
    }
    return dist.argmax();
}

std::vector<double> evaluate_greedy(const PolicyModel& policy, std::size_t episodes, std::uint64_t seed) {
    std::vector<double> returns;
    for (std::size_t e = 0; e < episodes; ++e) {
        auto [state, frame] = env::env_reset(policy.env, nn::derive_seed(seed, e));
        FrameStack stack = FrameStack::filled(frame);
        double total = 0.0;
        while (!state.done()) {
            const auto r = env::env_step(state, greedy_action(policy, stack));
            total += r.reward;
            stack = stack.pushed(r.frame);
        }
        returns.push_back(total);
    }
    return returns;
}

std::vector<double> evaluate_random(env::EnvKind kind, std::size_t episodes, std::uint64_t seed) {
    std::vector<double> returns;
    nn::Rng rng(nn::derive_seed(seed, 0x7261ULL));
    for (std::size_t e = 0; e < episodes; ++e) {
        auto [state, frame] = env::env_reset(kind, nn::derive_seed(seed, e));
        double total = 0.0;
        while (!state.done()) total += env::env_step(state, rng.below(env::action_count(kind))).reward;
        returns.push_back(total);
    }
    return returns;
}

void save_policy(const std::string& path, const PolicyModel& policy,
                 const std::map<std::string, std::string>& config_echo) {
    nn::save_network(path, policy.q_network);
    std::ofstream meta(path + ".meta");
    if (!meta) throw FileError("cannot write " + path + ".meta");
    meta << "env=" << env::env_kind_name(policy.env) << '\n';
    meta << "action_count=" << policy.action_count << '\n';
    meta << "mean=";
    char buf[32];
    for (std::size_t i = 0; i < env::kPixels; ++i) {
        std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(policy.stats.mean[i]));
        meta << (i ? " " : "") << buf;
    }
    meta << '\n';
    for (const auto& [k, v] : config_echo) meta << "config." << k << '=' << v << '\n';
}

PolicyModel load_policy(const std::string& path) {
    PolicyModel p;
    p.q_network = nn::load_network(path);
    std::ifstream meta(path + ".meta");
    if (!meta) throw FileError("cannot open " + path + ".meta");
    std::string line;
    bool have_mean = false, have_env = false;
    while (std::getline(meta, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
        if (key == "env") {
            p.env = env::parse_env_kind(value);
            have_env = true;
        } else if (key == "action_count") {
            p.action_count = std::stoul(value);
        } else if (key == "mean") {
            std::istringstream is(value);
            for (std::size_t i = 0; i < env::kPixels; ++i) {
                if (!(is >> p.stats.mean[i])) throw FileError(path + ".meta: truncated mean frame");
            }
            have_mean = true;
        }
    }
    if (!have_mean || !have_env) throw FileError(path + ".meta: missing env or mean");
    if (p.action_count != p.q_network.output_size() || p.action_count != env::action_count(p.env)) {
        throw FileError(path + ": action count does not match network output");
    }
    return p;
}

}  // namespace fg::policy
