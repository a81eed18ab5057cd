#pragma once
// Action-conditioned frame predictor: encoder -> factored multiplicative
// action transform -> decoder. With the transform removed it doubles as the
// single-frame autoencoder baseline.
//
//   h      = encoder(x_{t-4..t-1}, one-hot a_{t-4..t-2})
//   h_dec  = W_dec ((W_enc h) * (W_a onehot(a_{t-1}))) + b
//   x_hat  = clamp(decoder(h_dec) + mean, 0, 1)
//
// Everything before the clamp runs in preprocessed (mean-subtracted) space.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fg/env/env.hpp"
#include "fg/nn/network.hpp"
#include "fg/policy/policy.hpp"

namespace fg::foresight {

using env::Frame;

inline constexpr std::size_t kHistory = 4;

// The m previous observed frames (oldest first) and the actions executed after each.
struct History {
    std::array<Frame, kHistory> frames;
    std::array<std::size_t, kHistory> actions{};
};

struct PredictorArch {
    // Compact network specs (see nn::build_network). A spec starting with
    // "conv" makes the encoder consume [C x 16 x 16] planes with the earlier
    // actions as constant one-hot planes; otherwise inputs are flat vectors.
    std::string encoder = "affine:512,relu,affine:256,relu";
    std::string decoder = "affine:512,relu,affine:256";
    std::size_t factors = 128;
};

struct PredictorTape {
    std::size_t batch = 0;
    nn::Tape encoder;
    nn::Tape decoder;
    std::vector<float> factors_enc;  // W_enc h          [B x f]
    std::vector<float> factors_act;  // W_a onehot(a)    [B x f]
    std::vector<float> product;      // elementwise product [B x f]
    std::vector<std::size_t> actions;
    std::span<const float> output() const { return decoder.output(); }
};

class PredictorModel {
public:
    PredictorModel() = default;
    // action_conditioned = false builds the autoencoder variant (one input frame, no transform).
    static PredictorModel create(const PredictorArch& arch, std::size_t action_count, const policy::PixelStats& stats,
                                 bool action_conditioned, std::uint64_t seed);

    bool action_conditioned() const { return conditioned_; }
    std::size_t action_count() const { return action_count_; }
    std::size_t feature_size() const { return encoder_.output_size(); }
    std::size_t factor_size() const { return conditioned_ ? w_enc_.shape()[0] : 0; }
    std::size_t input_frames() const { return conditioned_ ? kHistory : 1; }
    std::size_t encoder_input_size() const { return encoder_.input_size(); }
    const policy::PixelStats& stats() const { return stats_; }

    std::uint64_t trained_iterations = 0;

    const nn::Network& encoder() const { return encoder_; }
    const nn::Network& decoder() const { return decoder_; }
    nn::Network& decoder() { return decoder_; }

    std::vector<nn::Tensor*> params();
    std::vector<const nn::Tensor*> params() const;
    std::vector<nn::Tensor> make_gradients() const;

    // Packs preprocessed frames (input_frames() x 256) and the earlier actions
    // (3 for the predictor, none for the autoencoder) into one encoder input.
    void pack_input(std::span<const float> frames, std::span<const std::size_t> earlier_actions,
                    std::span<float> out) const;
    // Frame slot k occupies [k * 256, (k + 1) * 256) of a packed input in both layouts.
    static constexpr std::size_t frame_offset(std::size_t k) { return k * env::kPixels; }

    // Batched forward over packed inputs; last_actions ignored by the autoencoder.
    void forward(std::span<const float> packed, std::span<const std::size_t> last_actions, std::size_t batch,
                 PredictorTape& tape) const;
    // Accumulates parameter gradients (skipped when grads is empty) and writes
    // the packed-input gradient to d_packed (skipped when empty).
    void backward(const PredictorTape& tape, std::span<const float> dout, std::span<nn::Tensor> grads,
                  std::span<float> d_packed) const;

    // Whole-model descriptor list and parameter list for the FGN1 container.
    std::vector<std::string> descriptors() const;
    static PredictorModel from_descriptors(std::span<const std::string> descriptors);

private:
    bool conditioned_ = true;
    std::size_t action_count_ = 0;
    policy::PixelStats stats_;
    nn::Network encoder_;
    nn::Tensor w_enc_;  // [f x n]
    nn::Tensor w_dec_;  // [n x f]
    nn::Tensor w_a_;    // [f x A]
    nn::Tensor bias_;   // [n]
    nn::Network decoder_;
};

// x_hat_t from the m previous frames and actions. Never reads x_t.
Frame predict_frame(const PredictorModel& model, const History& history);

// Autoregressive k-step rollout. future_actions[j] conditions predicted frame j
// (so future_actions[0] plays the role of history.actions.back()); each
// prediction is appended to the frame window for the next step.
std::vector<Frame> rollout_k(const PredictorModel& model, const std::array<Frame, kHistory>& frames,
                             std::span<const std::size_t> earlier_actions, std::span<const std::size_t> future_actions);

// Autoencoder reconstruction of a single frame.
Frame reconstruct(const PredictorModel& autoencoder, const Frame& frame);

void save_predictor(const std::string& path, const PredictorModel& model);
PredictorModel load_predictor(const std::string& path);

// What the detector consults for x_hat_t.
class FramePredictor {
public:
    virtual ~FramePredictor() = default;
    virtual Frame predict(const History& history) const = 0;
    // Called by the evaluation loop with the unperturbed frame before scoring;
    // only the simulator stand-in uses it.
    virtual void observe_pristine(const Frame&) {}
};

class LearnedPredictor final : public FramePredictor {
public:
    explicit LearnedPredictor(const PredictorModel& model);
    Frame predict(const History& history) const override { return predict_frame(model_, history); }

private:
    const PredictorModel& model_;
};

// Perfect predictor stand-in: returns the environment's true frame.
class OraclePredictor final : public FramePredictor {
public:
    Frame predict(const History&) const override { return next_; }
    void observe_pristine(const Frame& frame) override { next_ = frame; }

private:
    Frame next_;
};

}  // namespace fg::foresight
