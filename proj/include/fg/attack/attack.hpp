#pragma once
// White-box perturbations of the newest frame of a policy's input stack,
// bounded in L-infinity by epsilon and kept inside [0,1].

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "fg/policy/policy.hpp"

namespace fg::attack {

using env::Frame;
using policy::FrameStack;

enum class AttackKind { fgsm, bim, cw_lite };

AttackKind parse_attack_kind(std::string_view name);
std::string_view attack_kind_name(AttackKind kind);

inline constexpr double kMaxEpsilon = 0.1;
inline constexpr double kMargin = 0.01;  // kappa of the margin loss

struct AttackConfig {
    AttackKind kind = AttackKind::fgsm;
    double epsilon = 0.01;
    double alpha = 0.0;  // 0 means epsilon / 4
    std::size_t iterations = 10;
    // Action the attack pushes away from; the clean greedy action when unset.
    std::optional<std::size_t> label;

    double step_size() const { return alpha > 0.0 ? alpha : epsilon / 4.0; }
    void validate() const;
};

struct AttackOutcome {
    Frame adversarial;
    double delta_linf = 0.0;
    bool success = false;  // greedy action on the perturbed stack differs from the label
    std::size_t iterations_used = 0;
};

AttackOutcome fgsm(const policy::PolicyModel& policy, const FrameStack& stack, double epsilon,
                   std::optional<std::size_t> label = std::nullopt);
AttackOutcome bim(const policy::PolicyModel& policy, const FrameStack& stack, double epsilon, double alpha,
                  std::size_t iterations, std::optional<std::size_t> label = std::nullopt);
// Signed-gradient descent on max(Q(label) - max_{a != label} Q(a), -kappa).
AttackOutcome cw_linf_lite(const policy::PolicyModel& policy, const FrameStack& stack, double epsilon, double alpha,
                           std::size_t iterations, std::optional<std::size_t> label = std::nullopt);

AttackOutcome craft(const policy::PolicyModel& policy, const FrameStack& stack, const AttackConfig& config);

// Gradient of the cross-entropy between pi(stack) and `action` with respect
// to the newest frame's pixels.
std::vector<float> cross_entropy_gradient(const policy::PolicyModel& policy, const FrameStack& stack,
                                          std::size_t action);

enum class ScheduleMode { bernoulli, periodic };

ScheduleMode parse_schedule_mode(std::string_view name);

struct ScheduleConfig {
    ScheduleMode mode = ScheduleMode::bernoulli;
    double ratio = 0.5;
    std::size_t period = 100;
    std::size_t width = 50;
    void validate() const;
};

struct ScheduleMask {
    std::vector<bool> attacked;
    bool at(std::size_t t) const { return t < attacked.size() && attacked[t]; }
};

ScheduleMask schedule_mask(std::size_t steps, const ScheduleConfig& config, std::uint64_t seed);

}  // namespace fg::attack
