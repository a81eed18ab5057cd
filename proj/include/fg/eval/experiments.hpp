#pragma once
// The evaluation experiments: detection PR curves, reward under attack,
// predictor quality versus detection, and score timelines.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fg/eval/metrics.hpp"
#include "fg/foresight/train.hpp"
#include "fg/guard/guard.hpp"

namespace fg::eval {

// Trial i of an experiment runs the episode seeded derive_seed(seed, 100 + i).
std::vector<std::uint64_t> trial_seeds(std::uint64_t seed, std::size_t trials);
// Disjoint seeds for threshold calibration.
std::vector<std::uint64_t> calibration_seeds(std::uint64_t seed, std::size_t trials);

struct DetectResult {
    std::vector<guard::EpisodeLog> logs;
    std::vector<Labeled> labeled;
    std::vector<PRCurve> curves;
    std::optional<double> map;
    PRBand band;
};

// detect_only episodes (the detector never changes actions), one per seed.
DetectResult eval_detect(const guard::GuardConfig& config, const guard::GuardModels& models,
                         const std::vector<std::uint64_t>& seeds, std::size_t jobs = 1);

// F1-maximizing threshold over pooled detect_only episodes.
double calibrate_threshold(const guard::GuardConfig& config, const guard::GuardModels& models,
                           const std::vector<std::uint64_t>& seeds, std::size_t jobs = 1);

struct RewardRow {
    double ratio = 0.0;
    std::string defense;  // a defense name or "clean"
    std::size_t trial = 0;
    double total_return = 0.0;
};

struct RewardCell {
    double ratio = 0.0;
    std::string defense;
    double mean = 0.0;
    double stddev = 0.0;
};

struct RewardSweepConfig {
    guard::GuardConfig base;  // attack and bernoulli schedule; ratio and defense are swept
    std::vector<double> ratios = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    std::vector<guard::DefenseKind> defenses = {guard::DefenseKind::foresight_suggest,
                                                guard::DefenseKind::random_on_flag,
                                                guard::DefenseKind::squeeze_suggest, guard::DefenseKind::none};
    detect::DetectorConfig foresight;  // used by foresight_suggest and random_on_flag
    detect::DetectorConfig squeeze;    // used by squeeze_suggest
    std::size_t trials = 5;
    std::uint64_t seed = 1;
    std::size_t jobs = 1;
};

struct RewardTable {
    std::vector<RewardRow> rows;
    std::vector<RewardCell> cells;
    const RewardCell* find(double ratio, const std::string& defense) const;
};

RewardTable reward_sweep(const RewardSweepConfig& config, const guard::GuardModels& models);

struct StudyRecord {
    std::string snapshot;
    double mse = 0.0;
    std::optional<double> map;
};

// Foresight-detector mAP of each snapshot under a fixed attack config.
std::vector<StudyRecord> quality_study(const std::vector<foresight::Snapshot>& snapshots,
                                       const guard::GuardConfig& config, const guard::GuardModels& models,
                                       const std::vector<std::uint64_t>& seeds, std::size_t jobs = 1);

struct TimelinePoint {
    int t = 0;
    double score = 0.0;
    bool attacked = false;
};

std::vector<TimelinePoint> timeline_export(const guard::EpisodeLog& log);

// Mean score of scored steps inside and outside attack windows.
struct Separation {
    double inside = 0.0;
    double outside = 0.0;
    std::size_t inside_count = 0;
    std::size_t outside_count = 0;
};
Separation timeline_separation(const std::vector<guard::EpisodeLog>& logs);

}  // namespace fg::eval
