#pragma once
// Closed-loop episodes under a scheduled adversary with an optional detector
// and defense, logging one record per step.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fg/attack/attack.hpp"
#include "fg/detect/detect.hpp"
#include "fg/foresight/predictor.hpp"
#include "fg/policy/policy.hpp"

namespace fg::guard {

enum class DefenseKind { none, detect_only, foresight_suggest, random_on_flag, squeeze_suggest };

DefenseKind parse_defense_kind(std::string_view name);
std::string_view defense_kind_name(DefenseKind kind);

struct StepRecord {
    int t = 0;
    bool attacked = false;
    bool attack_success = false;
    bool scored = false;  // false while the history is still padding
    double score = 0.0;
    bool flagged = false;
    std::size_t action_taken = 0;
    std::size_t action_clean = 0;  // greedy on the pristine frame
    double reward = 0.0;
};

struct EpisodeLog {
    std::uint64_t seed = 0;
    std::map<std::string, std::string> config;
    std::vector<StepRecord> steps;
    double total_return = 0.0;
};

struct GuardConfig {
    env::EnvKind env = env::EnvKind::pong_lite;
    attack::AttackConfig attack;
    attack::ScheduleConfig schedule;
    DefenseKind defense = DefenseKind::none;
    std::optional<detect::DetectorConfig> detector;

    void validate() const;
    std::map<std::string, std::string> echo() const;
};

struct GuardModels {
    const policy::PolicyModel* policy = nullptr;
    const foresight::PredictorModel* predictor = nullptr;
    bool oracle_predictor = false;  // use the true frame in place of a learned prediction
    const foresight::PredictorModel* autoencoder = nullptr;
};

// Mutable state of one protected episode: observed history and the detector.
class GuardLoop {
public:
    GuardLoop(const GuardConfig& config, const GuardModels& models, std::uint64_t seed, const env::Frame& first);

    const foresight::History& history() const { return history_; }

    // Scores the observation, picks the action and appends (observed, action)
    // to the history. `pristine` is used only for labelling and by the oracle
    // predictor.
    StepRecord protected_step(int t, const env::Frame& observed, const env::Frame& pristine, bool attacked,
                              bool attack_success);

private:
    const GuardConfig& config_;
    GuardModels models_;
    foresight::History history_;
    std::unique_ptr<foresight::FramePredictor> predictor_;
    std::optional<detect::Detector> detector_;
    nn::Rng random_rng_;
};

EpisodeLog run_episode(const GuardConfig& config, const GuardModels& models, std::uint64_t seed);

// One episode per seed; jobs > 1 runs episodes on worker threads.
std::vector<EpisodeLog> run_trials(const GuardConfig& config, const GuardModels& models,
                                   const std::vector<std::uint64_t>& seeds, std::size_t jobs = 1);

// Header line {"seed","return","steps","config"} then one object per step.
void write_log(std::ostream& os, const EpisodeLog& log);
EpisodeLog read_log(std::istream& is);

}  // namespace fg::guard
