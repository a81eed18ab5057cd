#include "fg/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fg/error.hpp"
#include "fg/nn/linalg.hpp"
#include "fg/simd/kernels.hpp"

namespace fg::nn {
namespace {

std::string dims_text(const Shape& s) {
    std::ostringstream os;
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? " " : "") << s[i];
    return os.str();
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(text);
    while (std::getline(is, cur, sep)) {
        const auto b = cur.find_first_not_of(" \t");
        const auto e = cur.find_last_not_of(" \t");
        out.push_back(b == std::string::npos ? std::string{} : cur.substr(b, e - b + 1));
    }
    return out;
}

std::size_t to_size(const std::string& s, const std::string& ctx) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size() || v <= 0) throw Error("");
        return static_cast<std::size_t>(v);
    } catch (...) {
        throw Error("network spec: bad integer '" + s + "' in '" + ctx + "'");
    }
}

}  // namespace

// ---- Affine ---------------------------------------------------------------

Affine::Affine(std::size_t in, std::size_t out) : in_(in), out_(out) {
    params_.emplace_back(Shape{out, in});
    params_.emplace_back(Shape{out});
}

std::string Affine::descriptor() const { return "affine " + std::to_string(in_) + " " + std::to_string(out_); }

void Affine::forward(const float* in, float* out, std::size_t batch, std::vector<float>&,
                     const ForwardMode&) const {
    affine_forward(in, params_[0].data(), params_[1].data(), out, batch, in_, out_);
}

void Affine::backward(const float* in, const float*, const float* dout, float* din, std::span<Tensor> grads,
                      std::size_t batch, const std::vector<float>&) const {
    float* dw = grads.empty() ? nullptr : grads[0].data();
    float* db = grads.empty() ? nullptr : grads[1].data();
    affine_backward(in, params_[0].data(), dout, din, dw, db, batch, in_, out_);
}

// ---- Relu -----------------------------------------------------------------

std::string Relu::descriptor() const { return "relu " + dims_text(shape_); }

void Relu::forward(const float* in, float* out, std::size_t batch, std::vector<float>&,
                   const ForwardMode&) const {
    simd::active().relu_forward(in, out, batch * shape_size(shape_));
}

void Relu::backward(const float* in, const float*, const float* dout, float* din, std::span<Tensor>,
                    std::size_t batch, const std::vector<float>&) const {
    if (din) simd::active().relu_backward(in, dout, din, batch * shape_size(shape_));
}

// ---- Reshape --------------------------------------------------------------

Reshape::Reshape(Shape in, Shape out) : in_(std::move(in)), out_(std::move(out)) {
    if (shape_size(in_) != shape_size(out_)) {
        throw Error("reshape: " + shape_string(in_) + " and " + shape_string(out_) + " differ in size");
    }
}

std::string Reshape::descriptor() const { return "reshape " + dims_text(in_) + " : " + dims_text(out_); }

void Reshape::forward(const float* in, float* out, std::size_t batch, std::vector<float>&,
                      const ForwardMode&) const {
    std::copy(in, in + batch * shape_size(in_), out);
}

void Reshape::backward(const float*, const float*, const float* dout, float* din, std::span<Tensor>,
                       std::size_t batch, const std::vector<float>&) const {
    if (din) std::copy(dout, dout + batch * shape_size(in_), din);
}

// ---- Dropout --------------------------------------------------------------

Dropout::Dropout(Shape shape, float rate) : shape_(std::move(shape)), rate_(rate) {
    if (!(rate >= 0.0f && rate < 1.0f)) throw Error("dropout: rate must be in [0, 1)");
}

std::string Dropout::descriptor() const {
    std::ostringstream os;
    os << "dropout " << rate_ << " : " << dims_text(shape_);
    return os.str();
}

void Dropout::forward(const float* in, float* out, std::size_t batch, std::vector<float>& scratch,
                      const ForwardMode& mode) const {
    const std::size_t n = batch * shape_size(shape_);
    if (!mode.dropout_rng || rate_ == 0.0f) {
        scratch.clear();
        std::copy(in, in + n, out);
        return;
    }
    const float keep_scale = 1.0f / (1.0f - rate_);
    scratch.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        scratch[i] = mode.dropout_rng->uniform() < rate_ ? 0.0f : keep_scale;
        out[i] = in[i] * scratch[i];
    }
}

void Dropout::backward(const float*, const float*, const float* dout, float* din, std::span<Tensor>,
                       std::size_t batch, const std::vector<float>& scratch) const {
    if (!din) return;
    const std::size_t n = batch * shape_size(shape_);
    if (scratch.empty()) {
        std::copy(dout, dout + n, din);
    } else {
        simd::active().multiply(dout, scratch.data(), din, n);
    }
}

// ---- Conv2d ---------------------------------------------------------------

Conv2d::Conv2d(std::size_t channels, std::size_t height, std::size_t width, std::size_t out_channels,
               std::size_t kernel, std::size_t stride, std::size_t pad)
    : channels_(channels), height_(height), width_(width), out_channels_(out_channels), kernel_(kernel),
      stride_(stride), pad_(pad) {
    if (kernel == 0 || stride == 0 || height + 2 * pad < kernel || width + 2 * pad < kernel) {
        throw Error("conv: kernel " + std::to_string(kernel) + " does not fit input " +
                    shape_string({channels, height, width}));
    }
    params_.emplace_back(Shape{out_channels, channels * kernel * kernel});
    params_.emplace_back(Shape{out_channels});
}

std::string Conv2d::descriptor() const {
    std::ostringstream os;
    os << "conv " << channels_ << ' ' << height_ << ' ' << width_ << ' ' << out_channels_ << ' ' << kernel_ << ' '
       << stride_ << ' ' << pad_;
    return os.str();
}

Shape Conv2d::in_shape() const { return {channels_, height_, width_}; }

Shape Conv2d::out_shape() const {
    const ConvGeometry g{channels_, height_, width_, kernel_, stride_, pad_};
    return {out_channels_, g.out_height(), g.out_width()};
}

void Conv2d::forward(const float* in, float* out, std::size_t batch, std::vector<float>& scratch,
                     const ForwardMode&) const {
    const ConvGeometry g{channels_, height_, width_, kernel_, stride_, pad_};
    const std::size_t positions = g.positions(), patch = g.patch();
    const std::size_t in_size = channels_ * height_ * width_;
    const std::size_t out_size = out_channels_ * positions;
    scratch.resize(batch * positions * patch);
    const auto& k = simd::active();
    const float* w = params_[0].data();
    const float* b = params_[1].data();
    for (std::size_t s = 0; s < batch; ++s) {
        float* cols = scratch.data() + s * positions * patch;
        im2col(g, in + s * in_size, cols);
        float* o = out + s * out_size;
        for (std::size_t oc = 0; oc < out_channels_; ++oc) {
            for (std::size_t p = 0; p < positions; ++p) {
                o[oc * positions + p] = k.dot(w + oc * patch, cols + p * patch, patch) + b[oc];
            }
        }
    }
}

void Conv2d::backward(const float*, const float*, const float* dout, float* din, std::span<Tensor> grads,
                      std::size_t batch, const std::vector<float>& scratch) const {
    const ConvGeometry g{channels_, height_, width_, kernel_, stride_, pad_};
    const std::size_t positions = g.positions(), patch = g.patch();
    const std::size_t in_size = channels_ * height_ * width_;
    const std::size_t out_size = out_channels_ * positions;
    const auto& k = simd::active();
    const float* w = params_[0].data();
    std::vector<float> dcols(din ? positions * patch : 0);
    for (std::size_t s = 0; s < batch; ++s) {
        const float* cols = scratch.data() + s * positions * patch;
        const float* d = dout + s * out_size;
        if (!grads.empty()) {
            float* dw = grads[0].data();
            float* db = grads[1].data();
            for (std::size_t oc = 0; oc < out_channels_; ++oc) {
                float acc = 0.0f;
                for (std::size_t p = 0; p < positions; ++p) {
                    const float gv = d[oc * positions + p];
                    acc += gv;
                    if (gv != 0.0f) k.axpy(gv, cols + p * patch, dw + oc * patch, patch);
                }
                db[oc] += acc;
            }
        }
        if (din) {
            std::fill(dcols.begin(), dcols.end(), 0.0f);
            for (std::size_t p = 0; p < positions; ++p) {
                for (std::size_t oc = 0; oc < out_channels_; ++oc) {
                    const float gv = d[oc * positions + p];
                    if (gv != 0.0f) k.axpy(gv, w + oc * patch, dcols.data() + p * patch, patch);
                }
            }
            float* di = din + s * in_size;
            std::fill(di, di + in_size, 0.0f);
            col2im(g, dcols.data(), di);
        }
    }
}

// ---- Deconv2d -------------------------------------------------------------

Deconv2d::Deconv2d(std::size_t channels, std::size_t height, std::size_t width, std::size_t out_channels,
                   std::size_t kernel, std::size_t stride)
    : channels_(channels), height_(height), width_(width), out_channels_(out_channels), kernel_(kernel),
      stride_(stride) {
    if (kernel == 0 || stride == 0) throw Error("deconv: kernel and stride must be positive");
    params_.emplace_back(Shape{channels, out_channels * kernel * kernel});
    params_.emplace_back(Shape{out_channels});
}

std::string Deconv2d::descriptor() const {
    std::ostringstream os;
    os << "deconv " << channels_ << ' ' << height_ << ' ' << width_ << ' ' << out_channels_ << ' ' << kernel_ << ' '
       << stride_;
    return os.str();
}

Shape Deconv2d::in_shape() const { return {channels_, height_, width_}; }

Shape Deconv2d::out_shape() const {
    return {out_channels_, (height_ - 1) * stride_ + kernel_, (width_ - 1) * stride_ + kernel_};
}

void Deconv2d::forward(const float* in, float* out, std::size_t batch, std::vector<float>&,
                       const ForwardMode&) const {
    const Shape os = out_shape();
    // The output image is the "input" of a stride-S convolution whose output grid is H x W.
    const ConvGeometry g{out_channels_, os[1], os[2], kernel_, stride_, 0};
    const std::size_t positions = height_ * width_, patch = g.patch();
    const std::size_t in_size = channels_ * positions;
    const std::size_t out_size = shape_size(os);
    const std::size_t plane = os[1] * os[2];
    const auto& k = simd::active();
    const float* w = params_[0].data();
    const float* b = params_[1].data();
    std::vector<float> cols(positions * patch);
    for (std::size_t s = 0; s < batch; ++s) {
        const float* x = in + s * in_size;
        std::fill(cols.begin(), cols.end(), 0.0f);
        for (std::size_t p = 0; p < positions; ++p) {
            for (std::size_t c = 0; c < channels_; ++c) {
                const float v = x[c * positions + p];
                if (v != 0.0f) k.axpy(v, w + c * patch, cols.data() + p * patch, patch);
            }
        }
        float* o = out + s * out_size;
        std::fill(o, o + out_size, 0.0f);
        col2im(g, cols.data(), o);
        for (std::size_t oc = 0; oc < out_channels_; ++oc) {
            for (std::size_t i = 0; i < plane; ++i) o[oc * plane + i] += b[oc];
        }
    }
}

void Deconv2d::backward(const float* in, const float*, const float* dout, float* din, std::span<Tensor> grads,
                        std::size_t batch, const std::vector<float>&) const {
    const Shape os = out_shape();
    const ConvGeometry g{out_channels_, os[1], os[2], kernel_, stride_, 0};
    const std::size_t positions = height_ * width_, patch = g.patch();
    const std::size_t in_size = channels_ * positions;
    const std::size_t out_size = shape_size(os);
    const std::size_t plane = os[1] * os[2];
    const auto& k = simd::active();
    const float* w = params_[0].data();
    std::vector<float> dcols(positions * patch);
    for (std::size_t s = 0; s < batch; ++s) {
        const float* d = dout + s * out_size;
        im2col(g, d, dcols.data());
        const float* x = in + s * in_size;
        if (!grads.empty()) {
            float* dw = grads[0].data();
            float* db = grads[1].data();
            for (std::size_t p = 0; p < positions; ++p) {
                for (std::size_t c = 0; c < channels_; ++c) {
                    const float v = x[c * positions + p];
                    if (v != 0.0f) k.axpy(v, dcols.data() + p * patch, dw + c * patch, patch);
                }
            }
            for (std::size_t oc = 0; oc < out_channels_; ++oc) {
                float acc = 0.0f;
                for (std::size_t i = 0; i < plane; ++i) acc += d[oc * plane + i];
                db[oc] += acc;
            }
        }
        if (din) {
            float* di = din + s * in_size;
            for (std::size_t c = 0; c < channels_; ++c) {
                for (std::size_t p = 0; p < positions; ++p) {
                    di[c * positions + p] = k.dot(w + c * patch, dcols.data() + p * patch, patch);
                }
            }
        }
    }
}

// ---- descriptors ----------------------------------------------------------

std::unique_ptr<Layer> layer_from_descriptor(const std::string& text) {
    std::istringstream is(text);
    std::string kind;
    is >> kind;
    auto read_dims = [&](std::istringstream& in) {
        Shape s;
        std::string tok;
        while (in >> tok && tok != ":") s.push_back(to_size(tok, text));
        return s;
    };
    std::unique_ptr<Layer> layer;
    if (kind == "affine") {
        std::size_t in = 0, out = 0;
        if (is >> in >> out) layer = std::make_unique<Affine>(in, out);
    } else if (kind == "relu") {
        Shape s = read_dims(is);
        if (!s.empty()) layer = std::make_unique<Relu>(s);
    } else if (kind == "reshape") {
        Shape a = read_dims(is);
        Shape b = read_dims(is);
        if (!a.empty() && !b.empty()) layer = std::make_unique<Reshape>(a, b);
    } else if (kind == "dropout") {
        float rate = 0.0f;
        std::string colon;
        if (is >> rate >> colon && colon == ":") {
            Shape s = read_dims(is);
            if (!s.empty()) layer = std::make_unique<Dropout>(s, rate);
        }
    } else if (kind == "conv") {
        std::size_t c, h, w, oc, k, st, p;
        if (is >> c >> h >> w >> oc >> k >> st >> p) layer = std::make_unique<Conv2d>(c, h, w, oc, k, st, p);
    } else if (kind == "deconv") {
        std::size_t c, h, w, oc, k, st;
        if (is >> c >> h >> w >> oc >> k >> st) layer = std::make_unique<Deconv2d>(c, h, w, oc, k, st);
    }
    if (!layer) throw Error("unknown or malformed layer descriptor '" + text + "'");
    return layer;
}

// ---- Network --------------------------------------------------------------

Network::Network(Shape input_shape, std::vector<std::unique_ptr<Layer>> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
    if (layers_.empty()) throw Error("network: no layers");
    std::size_t cur = shape_size(input_shape_);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (!layers_[i]) throw Error("network: null layer");
        const std::size_t need = shape_size(layers_[i]->in_shape());
        if (need != cur) {
            throw Error("network: layer " + std::to_string(i) + " (" + layers_[i]->descriptor() + ") expects " +
                        std::to_string(need) + " inputs, previous stage yields " + std::to_string(cur));
        }
        cur = shape_size(layers_[i]->out_shape());
    }
}

Network::Network(const Network& other) : input_shape_(other.input_shape_) {
    layers_.reserve(other.layers_.size());
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Network& Network::operator=(const Network& other) {
    if (this != &other) {
        Network copy(other);
        *this = std::move(copy);
    }
    return *this;
}

Shape Network::output_shape() const { return layers_.empty() ? input_shape_ : layers_.back()->out_shape(); }

std::vector<Tensor*> Network::params() {
    std::vector<Tensor*> out;
    for (auto& l : layers_)
        for (Tensor& t : l->params()) out.push_back(&t);
    return out;
}

std::vector<const Tensor*> Network::params() const {
    std::vector<const Tensor*> out;
    for (const auto& l : layers_)
        for (const Tensor& t : std::as_const(*l).params()) out.push_back(&t);
    return out;
}

std::size_t Network::param_count() const {
    std::size_t n = 0;
    for (const Tensor* t : params()) n += t->size();
    return n;
}

std::vector<Tensor> Network::make_gradients() const {
    std::vector<Tensor> out;
    for (const Tensor* t : params()) out.emplace_back(t->shape());
    return out;
}

std::vector<std::string> Network::descriptors() const {
    std::vector<std::string> out;
    for (const auto& l : layers_) out.push_back(l->descriptor());
    return out;
}

Tensor Network::forward(const Tensor& input) const {
    if (input.shape() != input_shape_) {
        throw Error("forward: input shape " + shape_string(input.shape()) + " does not match network input " +
                    shape_string(input_shape_));
    }
    Tape tape;
    forward_batch(input.values(), 1, tape);
    const auto out = tape.output();
    return Tensor(output_shape(), std::vector<float>(out.begin(), out.end()));
}

void Network::forward_batch(std::span<const float> input, std::size_t batch, Tape& tape,
                            const ForwardMode& mode) const {
    if (input.size() != batch * input_size()) {
        throw Error("forward: got " + std::to_string(input.size()) + " values for batch " + std::to_string(batch) +
                    " of " + shape_string(input_shape_));
    }
    forward_from(0, input, batch, tape, mode);
}

void Network::forward_from(std::size_t first, std::span<const float> input, std::size_t batch, Tape& tape,
                           const ForwardMode& mode) const {
    tape.batch = batch;
    tape.activations.resize(layers_.size() + 1);
    tape.scratch.resize(layers_.size());
    tape.activations[first].assign(input.begin(), input.end());
    for (std::size_t i = first; i < layers_.size(); ++i) {
        auto& out = tape.activations[i + 1];
        out.resize(batch * shape_size(layers_[i]->out_shape()));
        layers_[i]->forward(tape.activations[i].data(), out.data(), batch, tape.scratch[i], mode);
    }
}

void Network::backward(const Tape& tape, std::span<const float> dout, std::span<Tensor> grads,
                       std::span<float> din) const {
    const std::size_t batch = tape.batch;
    if (dout.size() != batch * output_size()) throw Error("backward: output gradient has wrong size");
    if (!din.empty() && din.size() != batch * input_size()) throw Error("backward: input gradient has wrong size");
    std::vector<float> cur(dout.begin(), dout.end());
    std::vector<float> next;
    std::size_t gi = grads.size();
    for (std::size_t i = layers_.size(); i-- > 0;) {
        const Layer& l = *layers_[i];
        const std::size_t np = l.params().size();
        std::span<Tensor> lg;
        if (!grads.empty()) {
            gi -= np;
            lg = grads.subspan(gi, np);
        }
        const bool need_din = i > 0 || !din.empty();
        next.resize(need_din ? batch * shape_size(l.in_shape()) : 0);
        l.backward(tape.activations[i].data(), tape.activations[i + 1].data(), cur.data(),
                   need_din ? next.data() : nullptr, lg, batch, tape.scratch[i]);
        if (!need_din) break;
        cur.swap(next);
    }
    if (!din.empty()) std::copy(cur.begin(), cur.end(), din.begin());
}

// ---- construction from compact spec ----------------------------------------

void init_params(Network& net, Rng& rng) {
    for (std::size_t i = 0; i < net.layer_count(); ++i) {
        Layer& l = net.layer(i);
        auto ps = l.params();
        if (ps.empty()) continue;
        std::size_t fan_in = ps[0].shape()[1];
        if (dynamic_cast<Deconv2d*>(&l)) fan_in = ps[0].shape()[0];
        const double limit = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
        for (float& v : ps[0].values()) v = static_cast<float>(rng.uniform(-limit, limit));
        ps[1].fill(0.0f);
    }
}

Network build_network(const Shape& input_shape, const std::string& spec, Rng& rng) {
    std::vector<std::unique_ptr<Layer>> layers;
    Shape cur = input_shape;
    for (const std::string& item : split(spec, ',')) {
        if (item.empty()) continue;
        const auto parts = split(item, ':');
        const std::string& kind = parts[0];
        auto arg = [&](std::size_t i) {
            if (i >= parts.size()) throw Error("network spec: '" + item + "' is missing arguments");
            return to_size(parts[i], item);
        };
        if (kind == "affine") {
            layers.push_back(std::make_unique<Affine>(shape_size(cur), arg(1)));
        } else if (kind == "relu") {
            layers.push_back(std::make_unique<Relu>(cur));
        } else if (kind == "dropout") {
            if (parts.size() < 2) throw Error("network spec: dropout needs a rate");
            layers.push_back(std::make_unique<Dropout>(cur, std::stof(parts[1])));
        } else if (kind == "reshape") {
            layers.push_back(std::make_unique<Reshape>(cur, Shape{arg(1), arg(2), arg(3)}));
        } else if (kind == "conv") {
            if (cur.size() != 3) throw Error("network spec: conv needs a [C x H x W] input, got " + shape_string(cur));
            layers.push_back(std::make_unique<Conv2d>(cur[0], cur[1], cur[2], arg(1), arg(2), arg(3),
                                                      parts.size() > 4 ? std::stoul(parts[4]) : 0));
        } else if (kind == "deconv") {
            if (cur.size() != 3) {
                throw Error("network spec: deconv needs a [C x H x W] input, got " + shape_string(cur));
            }
            layers.push_back(std::make_unique<Deconv2d>(cur[0], cur[1], cur[2], arg(1), arg(2), arg(3)));
        } else {
            throw Error("network spec: unknown layer '" + kind + "'");
        }
        cur = layers.back()->out_shape();
    }
    Network net(input_shape, std::move(layers));
    init_params(net, rng);
    return net;
}

// ---- losses ---------------------------------------------------------------

LossResult mse_loss(std::span<const float> pred, std::span<const float> target) {
    if (pred.size() != target.size() || pred.empty()) throw Error("mse: size mismatch");
    LossResult r;
    r.grad.resize(pred.size());
    const double scale = 2.0 / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = static_cast<double>(pred[i]) - target[i];
        r.value += d * d;
        r.grad[i] = static_cast<float>(scale * d);
    }
    r.value /= static_cast<double>(pred.size());
    return r;
}

LossResult huber_loss(std::span<const float> pred, std::span<const float> target) {
    if (pred.size() != target.size() || pred.empty()) throw Error("huber: size mismatch");
    LossResult r;
    r.grad.resize(pred.size());
    const double n = static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = static_cast<double>(pred[i]) - target[i];
        if (std::abs(d) <= 1.0) {
            r.value += 0.5 * d * d;
            r.grad[i] = static_cast<float>(d / n);
        } else {
            r.value += std::abs(d) - 0.5;
            r.grad[i] = static_cast<float>((d > 0 ? 1.0 : -1.0) / n);
        }
    }
    r.value /= n;
    return r;
}

LossResult cross_entropy_loss(std::span<const float> logits, std::size_t action) {
    if (action >= logits.size()) throw Error("cross-entropy: action index out of range");
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (float v : logits) z += std::exp(static_cast<double>(v) - mx);
    LossResult r;
    r.value = -(static_cast<double>(logits[action]) - mx - std::log(z));
    r.grad.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double p = std::exp(static_cast<double>(logits[i]) - mx) / z;
        r.grad[i] = static_cast<float>(p - (i == action ? 1.0 : 0.0));
    }
    return r;
}

Tensor input_gradient(const Network& net, const Tensor& input, LossKind loss, const LossTarget& target) {
    if (input.shape() != net.input_shape()) {
        throw Error("input_gradient: input shape " + shape_string(input.shape()) + " does not match " +
                    shape_string(net.input_shape()));
    }
    Tape tape;
    net.forward_batch(input.values(), 1, tape);
    const auto out = tape.output();
    LossResult lr;
    if (loss == LossKind::cross_entropy) {
        const auto* a = std::get_if<std::size_t>(&target);
        if (!a) throw Error("input_gradient: cross-entropy needs an action index target");
        lr = cross_entropy_loss(out, *a);
    } else {
        const auto* t = std::get_if<Tensor>(&target);
        if (!t || t->size() != out.size()) throw Error("input_gradient: regression target must match output size");
        lr = loss == LossKind::mse ? mse_loss(out, t->values()) : huber_loss(out, t->values());
    }
    Tensor grad(input.shape());
    net.backward(tape, lr.grad, {}, grad.values());
    return grad;
}

}  // namespace fg::nn
