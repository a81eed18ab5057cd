#include "fg/foresight/train.hpp"

#include <algorithm>
#include <cmath>

#include "fg/error.hpp"
#include "fg/nn/optim.hpp"

namespace fg::foresight {
namespace {

constexpr std::size_t kEvalChunk = 256;

// Ground-truth frames and teacher actions for a batch of k-step windows.
// Position p in 0..3+k maps to frame t-4+p of the window's episode.
struct RolloutBatch {
    std::size_t batch = 0, horizon = 0;
    std::vector<float> truth;                // [B x (4+k) x 256], preprocessed
    std::vector<std::size_t> actions;        // [B x (3+k)]
    std::vector<float> preds;                // [B x k x 256], preprocessed and clamped
    std::vector<std::uint8_t> inside;        // clamp mask matching preds

    std::size_t positions() const { return kHistory + horizon; }
    const float* truth_at(std::size_t b, std::size_t p) const {
        return truth.data() + (b * positions() + p) * env::kPixels;
    }
    float* pred_at(std::size_t b, std::size_t j) { return preds.data() + (b * horizon + j) * env::kPixels; }
    std::size_t action_at(std::size_t b, std::size_t p) const { return actions[b * (kHistory - 1 + horizon) + p]; }
};

RolloutBatch load_batch(const PredictionDataset& data, std::span<const WindowRef> refs, std::size_t k,
                        const policy::PixelStats& stats) {
    RolloutBatch rb;
    rb.batch = refs.size();
    rb.horizon = k;
    rb.truth.resize(rb.batch * rb.positions() * env::kPixels);
    rb.actions.resize(rb.batch * (kHistory - 1 + k));
    rb.preds.resize(rb.batch * k * env::kPixels);
    rb.inside.resize(rb.preds.size());
    for (std::size_t b = 0; b < rb.batch; ++b) {
        const auto& ep = data.episodes[refs[b].episode];
        const std::size_t t0 = refs[b].t - kHistory;
        for (std::size_t p = 0; p < rb.positions(); ++p) {
            ep.frame_preprocessed(t0 + p, stats, rb.truth.data() + (b * rb.positions() + p) * env::kPixels);
        }
        for (std::size_t p = 0; p < kHistory - 1 + k; ++p) rb.actions[b * (kHistory - 1 + k) + p] = ep.actions[t0 + p];
    }
    return rb;
}

// Packs the encoder input of rollout step j: positions j..j+3, earlier actions j..j+2.
void pack_step(const PredictorModel& model, RolloutBatch& rb, std::size_t j, std::vector<float>& packed,
               std::vector<std::size_t>& last) {
    const std::size_t in = model.encoder_input_size();
    packed.resize(rb.batch * in);
    last.resize(rb.batch);
    std::vector<float> frames(kHistory * env::kPixels);
    std::array<std::size_t, kHistory - 1> earlier{};
    for (std::size_t b = 0; b < rb.batch; ++b) {
        for (std::size_t s = 0; s < kHistory; ++s) {
            const std::size_t p = j + s;
            const float* src = p < kHistory ? rb.truth_at(b, p) : rb.pred_at(b, p - kHistory);
            std::copy(src, src + env::kPixels, frames.begin() + static_cast<std::ptrdiff_t>(s * env::kPixels));
        }
        for (std::size_t s = 0; s + 1 < kHistory; ++s) earlier[s] = rb.action_at(b, j + s);
        last[b] = rb.action_at(b, j + kHistory - 1);
        model.pack_input(frames, earlier, std::span<float>(packed).subspan(b * in, in));
    }
}

// Clamps step-j outputs into the valid preprocessed range and stores them as feedback.
void store_prediction(RolloutBatch& rb, std::size_t j, std::span<const float> out, const policy::PixelStats& stats) {
    for (std::size_t b = 0; b < rb.batch; ++b) {
        float* dst = rb.pred_at(b, j);
        std::uint8_t* mask = rb.inside.data() + (b * rb.horizon + j) * env::kPixels;
        for (std::size_t i = 0; i < env::kPixels; ++i) {
            const float v = out[b * env::kPixels + i];
            const float lo = -stats.mean[i], hi = 1.0f - stats.mean[i];
            dst[i] = std::clamp(v, lo, hi);
            mask[i] = (v > lo && v < hi) ? 1 : 0;
        }
    }
}

std::vector<WindowRef> spread(std::vector<WindowRef> all, std::size_t max_count) {
    if (max_count == 0 || all.size() <= max_count) return all;
    std::vector<WindowRef> out;
    out.reserve(max_count);
    for (std::size_t i = 0; i < max_count; ++i) out.push_back(all[i * all.size() / max_count]);
    return out;
}

}  // namespace

std::vector<CurriculumPhase> default_curriculum() {
    return {{1, 1e-4f, 32, 20000}, {3, 1e-5f, 8, 5000}, {5, 1e-5f, 8, 5000}};
}

policy::PixelStats dataset_stats(const PredictionDataset& data) {
    std::array<double, env::kPixels> sum{};
    std::size_t n = 0;
    for (const auto& ep : data.episodes) {
        if (ep.split != Split::train) continue;
        for (std::size_t t = 0; t < ep.frame_count(); ++t) {
            const std::uint8_t* px = ep.frames.data() + t * env::kPixels;
            for (std::size_t i = 0; i < env::kPixels; ++i) sum[i] += px[i] / 255.0;
            ++n;
        }
    }
    if (n == 0) throw Error("dataset has no training frames");
    policy::PixelStats stats;
    for (std::size_t i = 0; i < env::kPixels; ++i) stats.mean[i] = static_cast<float>(sum[i] / static_cast<double>(n));
    return stats;
}

std::vector<double> rollout_mse(const PredictionDataset& data, const PredictorModel& model, Split split,
                                std::size_t k, std::size_t max_windows) {
    if (k == 0) throw Error("rollout_mse: k must be at least 1");
    const auto refs = spread(windows(data, split, k), max_windows);
    if (refs.empty()) throw Error("rollout_mse: split has no windows");
    const auto& stats = model.stats();
    std::vector<double> sums(k, 0.0);
    PredictorTape tape;
    std::vector<float> packed;
    std::vector<std::size_t> last;
    for (std::size_t start = 0; start < refs.size(); start += kEvalChunk) {
        const std::size_t n = std::min(kEvalChunk, refs.size() - start);
        auto rb = load_batch(data, std::span<const WindowRef>(refs).subspan(start, n), k, stats);
        for (std::size_t j = 0; j < k; ++j) {
            pack_step(model, rb, j, packed, last);
            model.forward(packed, last, n, tape);
            store_prediction(rb, j, tape.output(), stats);
            for (std::size_t b = 0; b < n; ++b) {
                const float* truth = rb.truth_at(b, kHistory + j);
                const float* pred = rb.pred_at(b, j);
                for (std::size_t i = 0; i < env::kPixels; ++i) {
                    const double d = static_cast<double>(pred[i]) - truth[i];
                    sums[j] += d * d;
                }
            }
        }
    }
    for (double& s : sums) s /= static_cast<double>(refs.size() * env::kPixels);
    return sums;
}

double prediction_mse(const PredictionDataset& data, const PredictorModel& model, Split split,
                      std::size_t max_windows) {
    return rollout_mse(data, model, split, 1, max_windows).front();
}

double reconstruction_mse(const PredictionDataset& data, const PredictorModel& autoencoder, Split split,
                          std::size_t max_frames) {
    std::vector<WindowRef> all;
    for (std::size_t e = 0; e < data.episodes.size(); ++e) {
        if (data.episodes[e].split != split) continue;
        for (std::size_t t = 0; t < data.episodes[e].frame_count(); ++t) all.push_back({e, t});
    }
    const auto refs = spread(std::move(all), max_frames);
    if (refs.empty()) throw Error("reconstruction_mse: split has no frames");
    const auto& stats = autoencoder.stats();
    double sum = 0.0;
    PredictorTape tape;
    std::vector<float> x;
    for (std::size_t start = 0; start < refs.size(); start += kEvalChunk) {
        const std::size_t n = std::min(kEvalChunk, refs.size() - start);
        x.resize(n * env::kPixels);
        for (std::size_t b = 0; b < n; ++b) {
            data.episodes[refs[start + b].episode].frame_preprocessed(refs[start + b].t, stats,
                                                                      x.data() + b * env::kPixels);
        }
        autoencoder.forward(x, {}, n, tape);
        const auto out = tape.output();
        for (std::size_t b = 0; b < n; ++b) {
            for (std::size_t i = 0; i < env::kPixels; ++i) {
                const float v = std::clamp(out[b * env::kPixels + i], -stats.mean[i], 1.0f - stats.mean[i]);
                const double d = static_cast<double>(v) - x[b * env::kPixels + i];
                sum += d * d;
            }
        }
    }
    return sum / static_cast<double>(refs.size() * env::kPixels);
}

PredictorTrainResult train_predictor(const PredictionDataset& data, const PredictorTrainConfig& config,
                                     const ProgressFn& progress) {
    if (data.episodes.empty()) throw Error("train_predictor: empty dataset");
    for (std::size_t i = 1; i < config.phases.size(); ++i) {
        if (config.phases[i].horizon < config.phases[i - 1].horizon) {
            throw Error("train_predictor: curriculum horizons must be non-decreasing");
        }
    }
    PredictorTrainResult result;
    result.model = PredictorModel::create(config.arch, data.action_count, dataset_stats(data), true,
                                          nn::derive_seed(config.seed, 1));
    PredictorModel& model = result.model;
    const auto& stats = model.stats();
    result.initial_val_mse = prediction_mse(data, model, Split::val, config.val_windows);

    auto params = model.params();
    auto grads = model.make_gradients();
    nn::AdamState adam = nn::make_adam_state(params);
    nn::Rng rng(nn::derive_seed(config.seed, 2));
    const std::size_t in = model.encoder_input_size();
    std::size_t iteration = 0;

    for (const auto& phase : config.phases) {
        if (phase.horizon == 0 || phase.batch_size == 0) throw Error("train_predictor: invalid curriculum phase");
        const auto pool = windows(data, Split::train, phase.horizon);
        if (pool.empty()) throw Error("train_predictor: no training windows for horizon " + std::to_string(phase.horizon));
        const std::size_t B = phase.batch_size, k = phase.horizon;
        std::vector<PredictorTape> tapes(k);
        std::vector<std::vector<float>> packed(k);
        std::vector<std::vector<std::size_t>> last(k);
        std::vector<float> loss_grad(B * env::kPixels), dout(B * env::kPixels), d_packed(B * in);
        std::vector<float> feedback(B * k * env::kPixels);
        std::vector<WindowRef> refs(B);

        for (std::size_t it = 0; it < phase.iterations; ++it) {
            for (auto& r : refs) r = pool[rng.below(pool.size())];
            auto rb = load_batch(data, refs, k, stats);
            const double scale = 2.0 / static_cast<double>(B * k * env::kPixels);
            double loss = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                pack_step(model, rb, j, packed[j], last[j]);
                model.forward(packed[j], last[j], B, tapes[j]);
                store_prediction(rb, j, tapes[j].output(), stats);
            }
            for (auto& g : grads) g.fill(0.0f);
            std::fill(feedback.begin(), feedback.end(), 0.0f);
            for (std::size_t j = k; j-- > 0;) {
                const auto out = tapes[j].output();
                for (std::size_t b = 0; b < B; ++b) {
                    const float* truth = rb.truth_at(b, kHistory + j);
                    const float* fb = feedback.data() + (b * k + j) * env::kPixels;
                    for (std::size_t i = 0; i < env::kPixels; ++i) {
                        const double d = static_cast<double>(out[b * env::kPixels + i]) - truth[i];
                        loss += d * d;
                        dout[b * env::kPixels + i] = static_cast<float>(scale * d) + fb[i];
                    }
                }
                // Predictions feed later steps only, so step 0 needs no input gradient.
                const bool need_input = j > 0;
                model.backward(tapes[j], dout, grads, need_input ? std::span<float>(d_packed) : std::span<float>());
                if (!need_input) continue;
                for (std::size_t s = 0; s < kHistory; ++s) {
                    const std::size_t p = j + s;
                    if (p < kHistory) continue;
                    const std::size_t src = p - kHistory;
                    for (std::size_t b = 0; b < B; ++b) {
                        const float* g = d_packed.data() + b * in + PredictorModel::frame_offset(s);
                        const std::uint8_t* mask = rb.inside.data() + (b * k + src) * env::kPixels;
                        float* fb = feedback.data() + (b * k + src) * env::kPixels;
                        for (std::size_t i = 0; i < env::kPixels; ++i) {
                            if (mask[i]) fb[i] += g[i];
                        }
                    }
                }
            }
            loss /= static_cast<double>(B * k * env::kPixels);
            if (!std::isfinite(loss)) {
                throw DivergenceError("train_predictor: non-finite loss at iteration " + std::to_string(iteration));
            }
            nn::adam_step(params, grads, adam, phase.learning_rate);
            ++iteration;
            model.trained_iterations = iteration;
            if (progress) progress(iteration, loss);
            if (std::find(config.snapshot_marks.begin(), config.snapshot_marks.end(), iteration) !=
                config.snapshot_marks.end()) {
                result.snapshots.push_back({iteration, model, prediction_mse(data, model, Split::val, config.val_windows)});
            }
        }
        result.phase_val_mse.push_back(prediction_mse(data, model, Split::val, config.val_windows));
    }
    return result;
}

AutoencoderTrainResult train_autoencoder(const PredictionDataset& data, const AutoencoderTrainConfig& config,
                                         const ProgressFn& progress) {
    if (data.episodes.empty()) throw Error("train_autoencoder: empty dataset");
    if (config.batch_size == 0) throw Error("train_autoencoder: batch size must be positive");
    AutoencoderTrainResult result;
    result.model = PredictorModel::create(config.arch, data.action_count, dataset_stats(data), false,
                                          nn::derive_seed(config.seed, 1));
    PredictorModel& model = result.model;
    const auto& stats = model.stats();

    std::vector<WindowRef> pool;
    for (std::size_t e = 0; e < data.episodes.size(); ++e) {
        if (data.episodes[e].split != Split::train) continue;
        for (std::size_t t = 0; t < data.episodes[e].frame_count(); ++t) pool.push_back({e, t});
    }
    if (pool.empty()) throw Error("train_autoencoder: no training frames");

    auto params = model.params();
    auto grads = model.make_gradients();
    nn::AdamState adam = nn::make_adam_state(params);
    nn::Rng rng(nn::derive_seed(config.seed, 2));
    const std::size_t B = config.batch_size;
    std::vector<float> x(B * env::kPixels), dout(B * env::kPixels);
    PredictorTape tape;
    const double scale = 2.0 / static_cast<double>(B * env::kPixels);

    auto checkpoint = [&](std::size_t it) {
        result.train_mse.emplace_back(it, reconstruction_mse(data, model, Split::train, config.eval_frames));
    };
    checkpoint(0);
    for (std::size_t it = 1; it <= config.iterations; ++it) {
        for (std::size_t b = 0; b < B; ++b) {
            const auto& r = pool[rng.below(pool.size())];
            data.episodes[r.episode].frame_preprocessed(r.t, stats, x.data() + b * env::kPixels);
        }
        model.forward(x, {}, B, tape);
        const auto out = tape.output();
        double loss = 0.0;
        for (std::size_t i = 0; i < B * env::kPixels; ++i) {
            const double d = static_cast<double>(out[i]) - x[i];
            loss += d * d;
            dout[i] = static_cast<float>(scale * d);
        }
        loss /= static_cast<double>(B * env::kPixels);
        if (!std::isfinite(loss)) {
            throw DivergenceError("train_autoencoder: non-finite loss at iteration " + std::to_string(it));
        }
        for (auto& g : grads) g.fill(0.0f);
        model.backward(tape, dout, grads, {});
        nn::adam_step(params, grads, adam, config.learning_rate);
        model.trained_iterations = it;
        if (progress) progress(it, loss);
        if (config.checkpoint_every > 0 && it % config.checkpoint_every == 0) checkpoint(it);
    }
    return result;
}

}  // namespace fg::foresight
