#include "fg/attack/attack.hpp"

#include <algorithm>
#include <cmath>

#include "fg/error.hpp"
#include "fg/simd/kernels.hpp"

namespace fg::attack {
namespace {

constexpr std::size_t kNewest = (policy::kStackDepth - 1) * env::kPixels;

void check_epsilon(double epsilon) {
    if (!(epsilon > 0.0 && epsilon <= kMaxEpsilon)) throw Error("attack: epsilon must lie in (0, 0.1]");
}

void check_iterative(double alpha, std::size_t iterations) {
    if (!(alpha > 0.0)) throw Error("attack: alpha must be positive");
    if (iterations == 0) throw Error("attack: iterations must be at least 1");
}

std::size_t resolve_label(const policy::PolicyModel& policy, const FrameStack& stack,
                          std::optional<std::size_t> label) {
    if (!label) return policy::greedy_action(policy, stack);
    if (*label >= policy.action_count) throw Error("attack: label out of range");
    return *label;
}

// Runs the network on a stack and back-propagates dout_fn(q) to the newest frame.
template <typename DoutFn>
std::vector<float> newest_gradient(const policy::PolicyModel& policy, const FrameStack& stack, DoutFn dout_fn) {
    const auto& net = policy.q_network;
    const auto x = policy.input(stack);
    nn::Tape tape;
    net.forward_batch(x, 1, tape);
    const std::vector<float> dout = dout_fn(tape.output());
    std::vector<float> din(x.size());
    net.backward(tape, dout, {}, din);
    return {din.begin() + kNewest, din.end()};
}

AttackOutcome finish(const policy::PolicyModel& policy, const FrameStack& stack, const Frame& adv,
                     std::size_t label, std::size_t iterations) {
    AttackOutcome out;
    out.adversarial = adv;
    const Frame& x = stack.newest();
    for (std::size_t i = 0; i < env::kPixels; ++i) {
        out.delta_linf = std::max(out.delta_linf, std::abs(static_cast<double>(adv.px[i]) - x.px[i]));
    }
    out.success = policy::greedy_action(policy, stack.with_newest(adv)) != label;
    out.iterations_used = iterations;
    return out;
}

AttackOutcome signed_gradient_attack(const policy::PolicyModel& policy, const FrameStack& stack, double epsilon,
                                     double alpha, std::size_t iterations, std::optional<std::size_t> label_opt) {
    const std::size_t label = resolve_label(policy, stack, label_opt);
    const Frame& origin = stack.newest();
    Frame adv = origin;
    const auto& k = simd::active();
    std::size_t used = 0;
    while (used < iterations) {
        const auto g = cross_entropy_gradient(policy, stack.with_newest(adv), label);
        Frame next;
        k.signed_step(origin.px.data(), adv.px.data(), g.data(), static_cast<float>(alpha),
                      static_cast<float>(epsilon), next.px.data(), env::kPixels);
        adv = next;
        ++used;
        if (used < iterations && policy::greedy_action(policy, stack.with_newest(adv)) != label) break;
    }
    return finish(policy, stack, adv, label, used);
}

}  // namespace

AttackKind parse_attack_kind(std::string_view name) {
    if (name == "fgsm") return AttackKind::fgsm;
    if (name == "bim") return AttackKind::bim;
    if (name == "cwlite") return AttackKind::cw_lite;
    throw Error("unknown attack '" + std::string(name) + "' (expected fgsm, bim or cwlite)");
}

std::string_view attack_kind_name(AttackKind kind) {
    switch (kind) {
        case AttackKind::fgsm: return "fgsm";
        case AttackKind::bim: return "bim";
        case AttackKind::cw_lite: return "cwlite";
    }
    return "?";
}

void AttackConfig::validate() const {
    check_epsilon(epsilon);
    if (alpha < 0.0) throw Error("attack: alpha must be non-negative");
    if (kind != AttackKind::fgsm && iterations == 0) throw Error("attack: iterations must be at least 1");
}

std::vector<float> cross_entropy_gradient(const policy::PolicyModel& policy, const FrameStack& stack,
                                          std::size_t action) {
    return newest_gradient(policy, stack, [&](std::span<const float> q) {
        const auto dist = nn::softmax_temp(q, 1.0);
        std::vector<float> d(q.size());
        for (std::size_t a = 0; a < q.size(); ++a) {
            d[a] = static_cast<float>(dist.probs[a] - (a == action ? 1.0 : 0.0));
        }
        return d;
    });
}

AttackOutcome fgsm(const policy::PolicyModel& policy, const FrameStack& stack, double epsilon,
                   std::optional<std::size_t> label) {
    check_epsilon(epsilon);
    return signed_gradient_attack(policy, stack, epsilon, epsilon, 1, label);
}

AttackOutcome bim(const policy::PolicyModel& policy, const FrameStack& stack, double epsilon, double alpha,
                  std::size_t iterations, std::optional<std::size_t> label) {
    check_epsilon(epsilon);
    check_iterative(alpha, iterations);
    return signed_gradient_attack(policy, stack, epsilon, alpha, iterations, label);
}

AttackOutcome cw_linf_lite(const policy::PolicyModel& policy, const FrameStack& stack, double epsilon, double alpha,
                           std::size_t iterations, std::optional<std::size_t> label_opt) {
    check_epsilon(epsilon);
    check_iterative(alpha, iterations);
    const std::size_t label = resolve_label(policy, stack, label_opt);
    if (policy.action_count < 2) throw Error("attack: margin loss needs at least two actions");
    const Frame& origin = stack.newest();
    Frame adv = origin;
    const auto& k = simd::active();
    std::size_t used = 0;
    while (used < iterations) {
        ++used;
        const auto x = stack.with_newest(adv);
        const nn::Tensor q = policy::q_values(policy, x);
        std::size_t rival = label == 0 ? 1 : 0;
        for (std::size_t a = 0; a < policy.action_count; ++a) {
            if (a != label && q[a] > q[rival]) rival = a;
        }
        const double margin = static_cast<double>(q[label]) - q[rival];
        if (margin < -kMargin) break;
        const auto g = newest_gradient(policy, x, [&](std::span<const float> out) {
            std::vector<float> d(out.size(), 0.0f);
            d[label] = 1.0f;
            d[rival] = -1.0f;
            return d;
        });
        Frame next;
        k.signed_step(origin.px.data(), adv.px.data(), g.data(), -static_cast<float>(alpha),
                      static_cast<float>(epsilon), next.px.data(), env::kPixels);
        adv = next;
    }
    return finish(policy, stack, adv, label, used);
}

AttackOutcome craft(const policy::PolicyModel& policy, const FrameStack& stack, const AttackConfig& config) {
    config.validate();
    switch (config.kind) {
        case AttackKind::fgsm: return fgsm(policy, stack, config.epsilon, config.label);
        case AttackKind::bim:
            return bim(policy, stack, config.epsilon, config.step_size(), config.iterations, config.label);
        case AttackKind::cw_lite:
            return cw_linf_lite(policy, stack, config.epsilon, config.step_size(), config.iterations, config.label);
    }
    throw Error("attack: unknown kind");
}

ScheduleMode parse_schedule_mode(std::string_view name) {
    if (name == "bernoulli") return ScheduleMode::bernoulli;
    if (name == "periodic") return ScheduleMode::periodic;
    throw Error("unknown attack mode '" + std::string(name) + "' (expected bernoulli or periodic)");
}

void ScheduleConfig::validate() const {
    if (mode == ScheduleMode::bernoulli) {
        if (!(ratio >= 0.0 && ratio <= 1.0)) throw Error("schedule: attack ratio must lie in [0, 1]");
    } else {
        if (period == 0) throw Error("schedule: period must be positive");
        if (width > period) throw Error("schedule: width exceeds period");
    }
}

ScheduleMask schedule_mask(std::size_t steps, const ScheduleConfig& config, std::uint64_t seed) {
    if (steps == 0) throw Error("schedule: length must be at least 1");
    config.validate();
    ScheduleMask mask;
    mask.attacked.resize(steps);
    nn::Rng rng(seed);
    for (std::size_t t = 0; t < steps; ++t) {
        mask.attacked[t] =
            config.mode == ScheduleMode::bernoulli ? rng.bernoulli(config.ratio) : (t % config.period) < config.width;
    }
    return mask;
}

}  // namespace fg::attack
