#pragma once
// Per-timestep adversarial scores: the foresight detector and three
// single-frame baselines (feature squeezing, autoencoder, MC dropout).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fg/foresight/predictor.hpp"
#include "fg/nn/rng.hpp"
#include "fg/policy/policy.hpp"

namespace fg::detect {

using env::Frame;
using nn::ActionDist;

enum class Metric { l1, chi2, histint };

Metric parse_metric(std::string_view name);
std::string_view metric_name(Metric metric);

double action_dist_distance(const ActionDist& p, const ActionDist& q, Metric metric);

// 2x2 median anchored at each pixel (covering the pixel, its right, lower and
// lower-right neighbours) with edge replication; even-window median is the
// mean of the two middle values.
Frame median_filter(const Frame& frame);

enum class DetectorKind { foresight, squeeze, autoencoder, dropout };

DetectorKind parse_detector_kind(std::string_view name);
std::string_view detector_kind_name(DetectorKind kind);

struct DetectorConfig {
    DetectorKind kind = DetectorKind::foresight;
    double threshold = 0.0;
    Metric metric = Metric::l1;
    std::size_t dropout_passes = 30;
    double dropout_rate = 0.2;
    void validate() const;
};

struct Verdict {
    double score = 0.0;
    bool flagged = false;
    ActionDist suggested;
    DetectorKind kind = DetectorKind::foresight;
};

// Models a detector may consult; only the ones its kind needs must be set.
struct DetectorModels {
    const policy::PolicyModel* policy = nullptr;
    foresight::FramePredictor* predictor = nullptr;
    const foresight::PredictorModel* autoencoder = nullptr;
};

class Detector {
public:
    Detector(const DetectorConfig& config, const DetectorModels& models, std::uint64_t dropout_seed = 0);

    const DetectorConfig& config() const { return config_; }

    // history: the 4 previously observed frames and the actions taken after
    // them; x_t: the current observation.
    Verdict score(const foresight::History& history, const Frame& x_t);

    // The dropout network (policy with dropout before its last affine layer).
    const nn::Network& dropout_network() const { return dropout_net_; }

private:
    DetectorConfig config_;
    DetectorModels models_;
    nn::Network dropout_net_;
    nn::Rng dropout_rng_;
};

// Threshold maximizing F1 when flagging score > H. Candidates are 0 and
// the midpoints between consecutive distinct scores. Throws without positives.
double f1_threshold(std::span<const double> scores, const std::vector<bool>& labels);

}  // namespace fg::detect
