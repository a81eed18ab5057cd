#include "fg/detect/detect.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "fg/error.hpp"

namespace fg::detect {
namespace {

nn::Network with_dropout(const nn::Network& net, float rate) {
    std::size_t last_affine = net.layer_count();
    for (std::size_t i = 0; i < net.layer_count(); ++i) {
        if (net.layer(i).descriptor().rfind("affine", 0) == 0) last_affine = i;
    }
    if (last_affine == net.layer_count()) throw Error("dropout detector: policy network has no affine layer");
    std::vector<std::unique_ptr<nn::Layer>> layers;
    for (std::size_t i = 0; i < net.layer_count(); ++i) {
        if (i == last_affine) layers.push_back(std::make_unique<nn::Dropout>(net.layer(i).in_shape(), rate));
        layers.push_back(net.layer(i).clone());
    }
    return nn::Network(net.input_shape(), std::move(layers));
}

}  // namespace

Metric parse_metric(std::string_view name) {
    if (name == "l1") return Metric::l1;
    if (name == "chi2") return Metric::chi2;
    if (name == "histint") return Metric::histint;
    throw Error("unknown metric '" + std::string(name) + "' (expected l1, chi2 or histint)");
}

std::string_view metric_name(Metric metric) {
    switch (metric) {
        case Metric::l1: return "l1";
        case Metric::chi2: return "chi2";
        case Metric::histint: return "histint";
    }
    return "?";
}

double action_dist_distance(const ActionDist& p, const ActionDist& q, Metric metric) {
    if (p.size() != q.size()) throw Error("distance: distributions differ in length");
    double d = 0.0;
    switch (metric) {
        case Metric::l1:
            for (std::size_t i = 0; i < p.size(); ++i) d += std::abs(p.probs[i] - q.probs[i]);
            return d;
        case Metric::chi2:
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double s = p.probs[i] + q.probs[i];
                if (s > 0.0) d += (p.probs[i] - q.probs[i]) * (p.probs[i] - q.probs[i]) / s;
            }
            return d;
        case Metric::histint: {
            double inter = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) inter += std::min(p.probs[i], q.probs[i]);
            return std::max(0.0, 1.0 - inter);
        }
    }
    return d;
}

Frame median_filter(const Frame& frame) {
    Frame out;
    const int last = env::kSide - 1;
    for (int r = 0; r < env::kSide; ++r) {
        for (int c = 0; c < env::kSide; ++c) {
            std::array<float, 4> w = {frame.at(r, c), frame.at(r, std::min(c + 1, last)),
                                      frame.at(std::min(r + 1, last), c),
                                      frame.at(std::min(r + 1, last), std::min(c + 1, last))};
            std::sort(w.begin(), w.end());
            out.at(r, c) = (w[1] + w[2]) * 0.5f;
        }
    }
    return out;
}

DetectorKind parse_detector_kind(std::string_view name) {
    if (name == "foresight") return DetectorKind::foresight;
    if (name == "squeeze") return DetectorKind::squeeze;
    if (name == "ae") return DetectorKind::autoencoder;
    if (name == "dropout") return DetectorKind::dropout;
    throw Error("unknown detector '" + std::string(name) + "' (expected foresight, squeeze, ae or dropout)");
}

std::string_view detector_kind_name(DetectorKind kind) {
    switch (kind) {
        case DetectorKind::foresight: return "foresight";
        case DetectorKind::squeeze: return "squeeze";
        case DetectorKind::autoencoder: return "ae";
        case DetectorKind::dropout: return "dropout";
    }
    return "?";
}

void DetectorConfig::validate() const {
    if (!(threshold >= 0.0)) throw Error("detector: threshold must be non-negative");
    if (kind == DetectorKind::dropout) {
        if (dropout_passes < 2) throw Error("detector: dropout needs at least 2 passes");
        if (!(dropout_rate > 0.0 && dropout_rate < 1.0)) throw Error("detector: dropout rate must lie in (0, 1)");
    }
}

Detector::Detector(const DetectorConfig& config, const DetectorModels& models, std::uint64_t dropout_seed)
    : config_(config), models_(models), dropout_rng_(dropout_seed) {
    config_.validate();
    if (!models_.policy) throw Error("detector: policy model required");
    switch (config_.kind) {
        case DetectorKind::foresight:
            if (!models_.predictor) throw Error("detector: foresight needs a frame predictor");
            break;
        case DetectorKind::autoencoder:
            if (!models_.autoencoder) throw Error("detector: autoencoder model required");
            if (models_.autoencoder->action_conditioned()) throw Error("detector: expected an autoencoder model");
            if (models_.autoencoder->trained_iterations == 0) throw Error("detector: autoencoder is untrained");
            break;
        case DetectorKind::dropout:
            dropout_net_ = with_dropout(models_.policy->q_network, static_cast<float>(config_.dropout_rate));
            break;
        case DetectorKind::squeeze: break;
    }
}

Verdict Detector::score(const foresight::History& history, const Frame& x_t) {
    const auto& policy = *models_.policy;
    policy::FrameStack stack;
    for (std::size_t k = 1; k < foresight::kHistory; ++k) stack.frames[k - 1] = history.frames[k];
    stack.frames.back() = x_t;

    Verdict v;
    v.kind = config_.kind;
    auto compare = [&](const Frame& alt) {
        const auto observed = policy::action_distribution(policy, stack);
        v.suggested = policy::action_distribution(policy, stack.with_newest(alt));
        v.score = action_dist_distance(v.suggested, observed, config_.metric);
    };
    switch (config_.kind) {
        case DetectorKind::foresight: compare(models_.predictor->predict(history)); break;
        case DetectorKind::squeeze: compare(median_filter(x_t)); break;
        case DetectorKind::autoencoder: compare(foresight::reconstruct(*models_.autoencoder, x_t)); break;
        case DetectorKind::dropout: {
            const std::size_t n = config_.dropout_passes, a = policy.action_count;
            const auto x = policy.input(stack);
            std::vector<float> batch(n * x.size());
            for (std::size_t i = 0; i < n; ++i) std::copy(x.begin(), x.end(), batch.begin() + i * x.size());
            nn::Tape tape;
            dropout_net_.forward_batch(batch, n, tape, nn::ForwardMode{&dropout_rng_});
            const auto q = tape.output();
            std::vector<ActionDist> dists;
            dists.reserve(n);
            for (std::size_t i = 0; i < n; ++i) dists.push_back(nn::softmax_temp(q.subspan(i * a, a), 1.0));
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = i + 1; j < n; ++j) sum += action_dist_distance(dists[i], dists[j], config_.metric);
            }
            v.score = sum / static_cast<double>(n * (n - 1) / 2);
            v.suggested.probs.assign(a, 0.0);
            for (const auto& d : dists) {
                for (std::size_t k = 0; k < a; ++k) v.suggested.probs[k] += d.probs[k] / static_cast<double>(n);
            }
            break;
        }
    }
    v.flagged = v.score > config_.threshold;
    return v;
}

double f1_threshold(std::span<const double> scores, const std::vector<bool>& labels) {
    if (scores.size() != labels.size()) throw Error("f1_threshold: scores and labels differ in length");
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    const auto positives = static_cast<double>(std::count(labels.begin(), labels.end(), true));
    if (positives == 0) throw Error("f1_threshold: calibration set has no positives");

    // Walk thresholds from high to low; ties keep the higher threshold.
    double best_f1 = 0.0, best_h = order.empty() ? 0.0 : scores[order.front()];
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (scores[order[i]] <= 0.0) break;  // unreachable with H >= 0
        (labels[order[i]] ? tp : fp) += 1;
        const bool boundary = i + 1 == order.size() || scores[order[i + 1]] < scores[order[i]];
        if (!boundary) continue;
        const double f1 = 2 * tp / (tp + fp + positives);
        if (f1 > best_f1) {
            best_f1 = f1;
            const double below = i + 1 == order.size() ? 0.0 : scores[order[i + 1]];
            best_h = std::max(0.0, 0.5 * (below + scores[order[i]]));
        }
    }
    return best_h;
}

}  // namespace fg::detect
