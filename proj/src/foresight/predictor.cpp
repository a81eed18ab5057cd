#include "fg/foresight/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fg/error.hpp"
#include "fg/nn/linalg.hpp"
#include "fg/nn/serialize.hpp"
#include "fg/simd/kernels.hpp"

namespace fg::foresight {
namespace {

bool uses_planes(const std::string& encoder_spec) { return encoder_spec.rfind("conv", 0) == 0; }

void fill_uniform(nn::Tensor& t, nn::Rng& rng, double limit) {
    for (float& v : t.values()) v = static_cast<float>(rng.uniform(-limit, limit));
}

}  // namespace

PredictorModel PredictorModel::create(const PredictorArch& arch, std::size_t action_count,
                                      const policy::PixelStats& stats, bool action_conditioned, std::uint64_t seed) {
    if (action_count == 0) throw Error("predictor: action count must be positive");
    nn::Rng rng(seed);
    PredictorModel m;
    m.conditioned_ = action_conditioned;
    m.action_count_ = action_count;
    m.stats_ = stats;

    const std::size_t frames = action_conditioned ? kHistory : 1;
    const std::size_t earlier = action_conditioned ? (kHistory - 1) * action_count : 0;
    nn::Shape in_shape;
    if (uses_planes(arch.encoder)) {
        in_shape = {frames + earlier, static_cast<std::size_t>(env::kSide), static_cast<std::size_t>(env::kSide)};
    } else {
        in_shape = {frames * env::kPixels + earlier};
    }
    m.encoder_ = nn::build_network(in_shape, arch.encoder, rng);
    const std::size_t n = m.encoder_.output_size();

    if (action_conditioned) {
        const std::size_t f = arch.factors;
        if (f == 0) throw Error("predictor: factor count must be positive");
        m.w_enc_ = nn::Tensor({f, n});
        m.w_dec_ = nn::Tensor({n, f});
        m.w_a_ = nn::Tensor({f, action_count});
        m.bias_ = nn::Tensor({n});
        fill_uniform(m.w_enc_, rng, std::sqrt(6.0 / static_cast<double>(n + f)));
        fill_uniform(m.w_dec_, rng, std::sqrt(6.0 / static_cast<double>(n + f)));
        fill_uniform(m.w_a_, rng, 1.0);
    }

    m.decoder_ = nn::build_network({n}, arch.decoder, rng);
    if (m.decoder_.output_size() != env::kPixels) {
        throw Error("predictor: decoder must output 256 values, got " + std::to_string(m.decoder_.output_size()));
    }
    // Zero output layer: an untrained model emits the bias image.
    for (std::size_t i = m.decoder_.layer_count(); i-- > 0;) {
        auto ps = m.decoder_.layer(i).params();
        if (!ps.empty()) {
            for (auto& t : ps) t.fill(0.0f);
            break;
        }
    }
    return m;
}

std::vector<nn::Tensor*> PredictorModel::params() {
    std::vector<nn::Tensor*> out = encoder_.params();
    if (conditioned_) {
        out.push_back(&w_enc_);
        out.push_back(&w_dec_);
        out.push_back(&w_a_);
        out.push_back(&bias_);
    }
    for (nn::Tensor* t : decoder_.params()) out.push_back(t);
    return out;
}

std::vector<const nn::Tensor*> PredictorModel::params() const {
    std::vector<const nn::Tensor*> out = encoder_.params();
    if (conditioned_) {
        out.push_back(&w_enc_);
        out.push_back(&w_dec_);
        out.push_back(&w_a_);
        out.push_back(&bias_);
    }
    for (const nn::Tensor* t : decoder_.params()) out.push_back(t);
    return out;
}

std::vector<nn::Tensor> PredictorModel::make_gradients() const {
    std::vector<nn::Tensor> out;
    for (const nn::Tensor* t : params()) out.emplace_back(t->shape());
    return out;
}

void PredictorModel::pack_input(std::span<const float> frames, std::span<const std::size_t> earlier_actions,
                                std::span<float> out) const {
    const std::size_t nframes = input_frames();
    if (frames.size() != nframes * env::kPixels) throw Error("predictor: wrong number of input frames");
    const std::size_t n_earlier = conditioned_ ? kHistory - 1 : 0;
    if (earlier_actions.size() != n_earlier) throw Error("predictor: wrong number of earlier actions");
    if (out.size() != encoder_input_size()) throw Error("predictor: packed buffer has wrong size");
    std::copy(frames.begin(), frames.end(), out.begin());
    const bool planes = encoder_.input_shape().size() == 3;
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(frames.size()), out.end(), 0.0f);
    for (std::size_t j = 0; j < n_earlier; ++j) {
        const std::size_t a = earlier_actions[j];
        if (a >= action_count_) throw Error("predictor: action out of range");
        if (planes) {
            const std::size_t plane = nframes + j * action_count_ + a;
            std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(plane * env::kPixels), env::kPixels, 1.0f);
        } else {
            out[frames.size() + j * action_count_ + a] = 1.0f;
        }
    }
}

void PredictorModel::forward(std::span<const float> packed, std::span<const std::size_t> last_actions,
                             std::size_t batch, PredictorTape& tape) const {
    tape.batch = batch;
    encoder_.forward_batch(packed, batch, tape.encoder);
    const auto h = tape.encoder.output();
    if (!conditioned_) {
        decoder_.forward_batch(h, batch, tape.decoder);
        return;
    }
    if (last_actions.size() != batch) throw Error("predictor: need one conditioning action per sample");
    const std::size_t n = feature_size(), f = factor_size();
    tape.actions.assign(last_actions.begin(), last_actions.end());
    tape.factors_enc.resize(batch * f);
    tape.factors_act.resize(batch * f);
    tape.product.resize(batch * f);
    nn::affine_forward(h.data(), w_enc_.data(), nullptr, tape.factors_enc.data(), batch, n, f);
    for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t a = last_actions[b];
        if (a >= action_count_) throw Error("predictor: action out of range");
        for (std::size_t i = 0; i < f; ++i) tape.factors_act[b * f + i] = w_a_[i * action_count_ + a];
    }
    simd::active().multiply(tape.factors_enc.data(), tape.factors_act.data(), tape.product.data(), batch * f);
    std::vector<float> hdec(batch * n);
    nn::affine_forward(tape.product.data(), w_dec_.data(), bias_.data(), hdec.data(), batch, f, n);
    decoder_.forward_batch(hdec, batch, tape.decoder);
}

void PredictorModel::backward(const PredictorTape& tape, std::span<const float> dout, std::span<nn::Tensor> grads,
                              std::span<float> d_packed) const {
    const std::size_t batch = tape.batch;
    const std::size_t n = feature_size();
    const std::size_t n_enc = encoder_.params().size();
    const std::size_t n_mid = conditioned_ ? 4 : 0;
    const bool want_grads = !grads.empty();
    std::span<nn::Tensor> g_enc, g_dec;
    if (want_grads) {
        g_enc = grads.subspan(0, n_enc);
        g_dec = grads.subspan(n_enc + n_mid);
    }

    std::vector<float> d_hdec(batch * n);
    decoder_.backward(tape.decoder, dout, g_dec, d_hdec);

    std::vector<float> dh;
    if (conditioned_) {
        const std::size_t f = factor_size();
        std::vector<float> d_product(batch * f), d_enc(batch * f), d_act(batch * f);
        float* dw_dec = want_grads ? grads[n_enc + 1].data() : nullptr;
        float* db = want_grads ? grads[n_enc + 3].data() : nullptr;
        nn::affine_backward(tape.product.data(), w_dec_.data(), d_hdec.data(), d_product.data(), dw_dec, db, batch,
                            f, n);
        const auto& k = simd::active();
        k.multiply(d_product.data(), tape.factors_act.data(), d_enc.data(), batch * f);
        if (want_grads) {
            k.multiply(d_product.data(), tape.factors_enc.data(), d_act.data(), batch * f);
            float* dw_a = grads[n_enc + 2].data();
            for (std::size_t b = 0; b < batch; ++b) {
                const std::size_t a = tape.actions[b];
                for (std::size_t i = 0; i < f; ++i) dw_a[i * action_count_ + a] += d_act[b * f + i];
            }
        }
        dh.resize(batch * n);
        float* dw_enc = want_grads ? grads[n_enc].data() : nullptr;
        nn::affine_backward(tape.encoder.output().data(), w_enc_.data(), d_enc.data(), dh.data(), dw_enc, nullptr,
                            batch, n, f);
    } else {
        dh = std::move(d_hdec);
    }
    encoder_.backward(tape.encoder, dh, g_enc, d_packed);
}

std::vector<std::string> PredictorModel::descriptors() const {
    std::vector<std::string> out;
    out.push_back("predictor " + std::to_string(action_count_) + " " + (conditioned_ ? "1" : "0") + " " +
                  std::to_string(trained_iterations));
    std::ostringstream mean;
    mean << "mean";
    char buf[32];
    for (float v : stats_.mean) {
        std::snprintf(buf, sizeof buf, " %.9g", static_cast<double>(v));
        mean << buf;
    }
    out.push_back(mean.str());
    const auto enc = nn::network_descriptors(encoder_);
    out.push_back("encoder " + std::to_string(enc.size()));
    out.insert(out.end(), enc.begin(), enc.end());
    if (conditioned_) {
        out.push_back("transform " + std::to_string(feature_size()) + " " + std::to_string(factor_size()) + " " +
                      std::to_string(action_count_));
    }
    const auto dec = nn::network_descriptors(decoder_);
    out.push_back("decoder " + std::to_string(dec.size()));
    out.insert(out.end(), dec.begin(), dec.end());
    return out;
}

PredictorModel PredictorModel::from_descriptors(std::span<const std::string> d) {
    std::size_t pos = 0;
    auto next = [&]() -> const std::string& {
        if (pos >= d.size()) throw FileError("predictor container: truncated descriptor list");
        return d[pos++];
    };
    PredictorModel m;
    {
        std::istringstream is(next());
        std::string tag;
        int cond = 0;
        if (!(is >> tag >> m.action_count_ >> cond >> m.trained_iterations) || tag != "predictor") {
            throw FileError("predictor container: missing 'predictor' header");
        }
        m.conditioned_ = cond != 0;
    }
    {
        std::istringstream is(next());
        std::string tag;
        is >> tag;
        if (tag != "mean") throw FileError("predictor container: missing mean frame");
        for (float& v : m.stats_.mean) {
            if (!(is >> v)) throw FileError("predictor container: truncated mean frame");
        }
    }
    auto read_net = [&](const std::string& want) {
        std::istringstream is(next());
        std::string tag;
        std::size_t count = 0;
        if (!(is >> tag >> count) || tag != want || pos + count > d.size()) {
            throw FileError("predictor container: bad '" + want + "' section");
        }
        auto net = nn::network_from_descriptors(d.subspan(pos, count));
        pos += count;
        return net;
    };
    m.encoder_ = read_net("encoder");
    if (m.conditioned_) {
        std::istringstream is(next());
        std::string tag;
        std::size_t n = 0, f = 0, a = 0;
        if (!(is >> tag >> n >> f >> a) || tag != "transform" || a != m.action_count_ || n != m.feature_size()) {
            throw FileError("predictor container: bad transform section");
        }
        m.w_enc_ = nn::Tensor({f, n});
        m.w_dec_ = nn::Tensor({n, f});
        m.w_a_ = nn::Tensor({f, a});
        m.bias_ = nn::Tensor({n});
    }
    m.decoder_ = read_net("decoder");
    if (pos != d.size()) throw FileError("predictor container: trailing descriptors");
    return m;
}

Frame predict_frame(const PredictorModel& model, const History& history) {
    if (!model.action_conditioned()) throw Error("predict_frame: model has no action transform");
    std::vector<float> frames(kHistory * env::kPixels);
    for (std::size_t k = 0; k < kHistory; ++k) {
        policy::preprocess(history.frames[k], model.stats(),
                           std::span<float>(frames).subspan(k * env::kPixels, env::kPixels));
    }
    std::vector<float> packed(model.encoder_input_size());
    model.pack_input(frames, std::span<const std::size_t>(history.actions.data(), kHistory - 1), packed);
    PredictorTape tape;
    const std::size_t last = history.actions.back();
    model.forward(packed, std::span<const std::size_t>(&last, 1), 1, tape);
    Frame out = policy::unpreprocess(tape.output(), model.stats());
    for (float& v : out.px) v = std::clamp(v, 0.0f, 1.0f);
    return out;
}

std::vector<Frame> rollout_k(const PredictorModel& model, const std::array<Frame, kHistory>& frames,
                             std::span<const std::size_t> earlier_actions,
                             std::span<const std::size_t> future_actions) {
    if (future_actions.empty()) throw Error("rollout_k: k must be at least 1");
    if (earlier_actions.size() != kHistory - 1) throw Error("rollout_k: need 3 earlier actions");
    History h;
    h.frames = frames;
    for (std::size_t i = 0; i + 1 < kHistory; ++i) h.actions[i] = earlier_actions[i];
    std::vector<Frame> out;
    for (std::size_t j = 0; j < future_actions.size(); ++j) {
        h.actions.back() = future_actions[j];
        Frame next = predict_frame(model, h);
        out.push_back(next);
        for (std::size_t i = 0; i + 1 < kHistory; ++i) {
            h.frames[i] = h.frames[i + 1];
            h.actions[i] = h.actions[i + 1];
        }
        h.frames.back() = next;
    }
    return out;
}

Frame reconstruct(const PredictorModel& autoencoder, const Frame& frame) {
    if (autoencoder.action_conditioned()) throw Error("reconstruct: model is action-conditioned, not an autoencoder");
    std::vector<float> x(env::kPixels);
    policy::preprocess(frame, autoencoder.stats(), x);
    std::vector<float> packed(autoencoder.encoder_input_size());
    autoencoder.pack_input(x, {}, packed);
    PredictorTape tape;
    autoencoder.forward(packed, {}, 1, tape);
    Frame out = policy::unpreprocess(tape.output(), autoencoder.stats());
    for (float& v : out.px) v = std::clamp(v, 0.0f, 1.0f);
    return out;
}

void save_predictor(const std::string& path, const PredictorModel& model) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FileError("cannot write " + path);
    const auto params = model.params();
    nn::write_container(os, model.descriptors(), params);
}

PredictorModel load_predictor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FileError("cannot open " + path);
    const auto desc = nn::read_descriptors(is);
    PredictorModel m = PredictorModel::from_descriptors(desc);
    nn::read_blocks(is, m.params());
    return m;
}

LearnedPredictor::LearnedPredictor(const PredictorModel& model) : model_(model) {
    if (!model.action_conditioned()) throw Error("foresight: predictor must be action-conditioned");
    if (model.trained_iterations == 0) throw Error("foresight: predictor is untrained");
}

}  // namespace fg::foresight
