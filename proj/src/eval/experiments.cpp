#include "fg/eval/experiments.hpp"

#include <cmath>

#include "fg/detect/detect.hpp"
#include "fg/error.hpp"

namespace fg::eval {
namespace {

guard::GuardConfig detect_only(const guard::GuardConfig& config) {
    if (!config.detector) throw Error("detection experiment needs a detector");
    guard::GuardConfig c = config;
    c.defense = guard::DefenseKind::detect_only;
    return c;
}

}  // namespace

std::vector<std::uint64_t> trial_seeds(std::uint64_t seed, std::size_t trials) {
    std::vector<std::uint64_t> out;
    for (std::size_t i = 0; i < trials; ++i) out.push_back(nn::derive_seed(seed, 100 + i));
    return out;
}

std::vector<std::uint64_t> calibration_seeds(std::uint64_t seed, std::size_t trials) {
    std::vector<std::uint64_t> out;
    for (std::size_t i = 0; i < trials; ++i) out.push_back(nn::derive_seed(seed, 900 + i));
    return out;
}

DetectResult eval_detect(const guard::GuardConfig& config, const guard::GuardModels& models,
                         const std::vector<std::uint64_t>& seeds, std::size_t jobs) {
    DetectResult r;
    r.logs = guard::run_trials(detect_only(config), models, seeds, jobs);
    std::vector<std::vector<double>> scores;
    std::vector<std::vector<bool>> labels;
    for (const auto& log : r.logs) {
        r.labeled.push_back(label_positives(log));
        r.curves.push_back(pr_curve_ap(r.labeled.back().scores, r.labeled.back().labels));
        scores.push_back(r.labeled.back().scores);
        labels.push_back(r.labeled.back().labels);
    }
    r.map = mean_ap(r.curves);
    r.band = pr_band(scores, labels);
    return r;
}

double calibrate_threshold(const guard::GuardConfig& config, const guard::GuardModels& models,
                           const std::vector<std::uint64_t>& seeds, std::size_t jobs) {
    const auto logs = guard::run_trials(detect_only(config), models, seeds, jobs);
    std::vector<double> scores;
    std::vector<bool> labels;
    for (const auto& log : logs) {
        const auto l = label_positives(log);
        scores.insert(scores.end(), l.scores.begin(), l.scores.end());
        labels.insert(labels.end(), l.labels.begin(), l.labels.end());
    }
    return detect::f1_threshold(scores, labels);
}

const RewardCell* RewardTable::find(double ratio, const std::string& defense) const {
    for (const auto& c : cells) {
        if (c.ratio == ratio && c.defense == defense) return &c;
    }
    return nullptr;
}

RewardTable reward_sweep(const RewardSweepConfig& config, const guard::GuardModels& models) {
    if (config.trials == 0) throw Error("reward sweep: trials must be positive");
    for (double r : config.ratios) {
        if (!(r >= 0.0 && r <= 1.0)) throw Error("reward sweep: ratios must lie in [0, 1]");
    }
    RewardTable table;
    const auto seeds = trial_seeds(config.seed, config.trials);
    auto add = [&](double ratio, const std::string& name, const std::vector<guard::EpisodeLog>& logs) {
        RewardCell cell{ratio, name, 0.0, 0.0};
        for (std::size_t i = 0; i < logs.size(); ++i) {
            table.rows.push_back({ratio, name, i, logs[i].total_return});
            cell.mean += logs[i].total_return;
        }
        cell.mean /= static_cast<double>(logs.size());
        for (const auto& log : logs) cell.stddev += (log.total_return - cell.mean) * (log.total_return - cell.mean);
        cell.stddev = std::sqrt(cell.stddev / static_cast<double>(logs.size()));
        table.cells.push_back(cell);
    };

    guard::GuardConfig clean = config.base;
    clean.schedule.mode = attack::ScheduleMode::bernoulli;
    clean.schedule.ratio = 0.0;
    clean.defense = guard::DefenseKind::none;
    clean.detector.reset();
    const auto clean_logs = guard::run_trials(clean, models, seeds, config.jobs);

    for (double ratio : config.ratios) {
        add(ratio, "clean", clean_logs);
        for (auto defense : config.defenses) {
            guard::GuardConfig c = config.base;
            c.schedule.mode = attack::ScheduleMode::bernoulli;
            c.schedule.ratio = ratio;
            c.defense = defense;
            switch (defense) {
                case guard::DefenseKind::none: c.detector.reset(); break;
                case guard::DefenseKind::squeeze_suggest: c.detector = config.squeeze; break;
                default: c.detector = config.foresight; break;
            }
            add(ratio, std::string(guard::defense_kind_name(defense)), guard::run_trials(c, models, seeds, config.jobs));
        }
    }
    return table;
}

std::vector<StudyRecord> quality_study(const std::vector<foresight::Snapshot>& snapshots,
                                       const guard::GuardConfig& config, const guard::GuardModels& models,
                                       const std::vector<std::uint64_t>& seeds, std::size_t jobs) {
    if (snapshots.size() < 3) throw Error("quality study: need at least 3 snapshots");
    if (!config.detector || config.detector->kind != detect::DetectorKind::foresight) {
        throw Error("quality study: needs the foresight detector");
    }
    std::vector<StudyRecord> out;
    for (const auto& snap : snapshots) {
        guard::GuardModels m = models;
        m.predictor = &snap.model;
        m.oracle_predictor = false;
        const auto r = eval_detect(config, m, seeds, jobs);
        out.push_back({std::to_string(snap.iteration), snap.val_mse, r.map});
    }
    return out;
}

std::vector<TimelinePoint> timeline_export(const guard::EpisodeLog& log) {
    std::vector<TimelinePoint> out;
    for (const auto& s : log.steps) out.push_back({s.t, s.score, s.attacked});
    return out;
}

Separation timeline_separation(const std::vector<guard::EpisodeLog>& logs) {
    Separation sep;
    for (const auto& log : logs) {
        for (const auto& s : log.steps) {
            if (!s.scored) continue;
            if (s.attacked) {
                sep.inside += s.score;
                ++sep.inside_count;
            } else {
                sep.outside += s.score;
                ++sep.outside_count;
            }
        }
    }
    if (sep.inside_count) sep.inside /= static_cast<double>(sep.inside_count);
    if (sep.outside_count) sep.outside /= static_cast<double>(sep.outside_count);
    return sep;
}

}  // namespace fg::eval
