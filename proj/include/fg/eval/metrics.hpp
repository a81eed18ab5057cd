#pragma once
// Precision-recall analysis of detector scores.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "fg/guard/guard.hpp"

namespace fg::eval {

struct Labeled {
    std::vector<double> scores;
    std::vector<bool> labels;  // attacked and the attack changed the greedy action
    std::vector<int> steps;
};

// Scored steps of a log with successful-attack labels; padding steps are skipped.
Labeled label_positives(const guard::EpisodeLog& log);

struct PRPoint {
    double threshold = 0.0;
    double precision = 1.0;  // 1 when nothing is flagged
    double recall = 0.0;
};

struct PRCurve {
    std::vector<PRPoint> points;  // ascending threshold, flag iff score > threshold
    std::optional<double> average_precision;  // absent without positives
};

PRCurve pr_curve_ap(std::span<const double> scores, const std::vector<bool>& labels);

// Mean of the defined APs; absent when none is defined.
std::optional<double> mean_ap(const std::vector<PRCurve>& curves);

inline constexpr std::size_t kRecallGrid = 101;

struct PRBand {
    std::vector<double> recall;  // 0, 0.01, ..., 1
    std::vector<double> mean;
    std::vector<double> stddev;
};

// Ranked (recall, precision) pairs of each curve, interpolated linearly onto
// the recall grid; mean and population std across curves with positives.
PRBand pr_band(const std::vector<std::vector<double>>& scores, const std::vector<std::vector<bool>>& labels);

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace fg::eval
