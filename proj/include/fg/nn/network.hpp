#pragma once
// Sequential feed-forward networks over a fixed layer catalog, with batched
// forward evaluation and reverse-mode gradients for parameters and inputs.

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fg/nn/rng.hpp"
#include "fg/nn/tensor.hpp"

namespace fg::nn {

// Dropout layers are the identity unless a forward pass supplies an RNG.
struct ForwardMode {
    Rng* dropout_rng = nullptr;
};

class Layer {
public:
    virtual ~Layer() = default;

    virtual std::unique_ptr<Layer> clone() const = 0;
    // Round-trippable one-line description, e.g. "affine 1024 256".
    virtual std::string descriptor() const = 0;
    virtual Shape in_shape() const = 0;
    virtual Shape out_shape() const = 0;

    virtual std::span<Tensor> params() { return {}; }
    virtual std::span<const Tensor> params() const { return {}; }

    // scratch is per-layer tape storage that survives until backward.
    virtual void forward(const float* in, float* out, std::size_t batch, std::vector<float>& scratch,
                         const ForwardMode& mode) const = 0;
    // din may be null when the input gradient is not needed; grads is empty
    // when parameter gradients are not needed.
    virtual void backward(const float* in, const float* out, const float* dout, float* din,
                          std::span<Tensor> grads, std::size_t batch,
                          const std::vector<float>& scratch) const = 0;
};

class Affine final : public Layer {
public:
    Affine(std::size_t in, std::size_t out);
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Affine>(*this); }
    std::string descriptor() const override;
    Shape in_shape() const override { return {in_}; }
    Shape out_shape() const override { return {out_}; }
    std::span<Tensor> params() override { return params_; }
    std::span<const Tensor> params() const override { return params_; }
    void forward(const float* in, float* out, std::size_t batch, std::vector<float>& scratch,
                 const ForwardMode& mode) const override;
    void backward(const float* in, const float* out, const float* dout, float* din, std::span<Tensor> grads,
                  std::size_t batch, const std::vector<float>& scratch) const override;

    Tensor& weight() { return params_[0]; }
    Tensor& bias() { return params_[1]; }

private:
    std::size_t in_, out_;
    std::vector<Tensor> params_;  // weight [out x in], bias [out]
};

class Relu final : public Layer {
public:
    explicit Relu(Shape shape) : shape_(std::move(shape)) {}
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(*this); }
    std::string descriptor() const override;
    Shape in_shape() const override { return shape_; }
    Shape out_shape() const override { return shape_; }
    void forward(const float* in, float* out, std::size_t batch, std::vector<float>& scratch,
                 const ForwardMode& mode) const override;
    void backward(const float* in, const float* out, const float* dout, float* din, std::span<Tensor> grads,
                  std::size_t batch, const std::vector<float>& scratch) const override;

private:
    Shape shape_;
};

// Changes the logical shape only; data is untouched.
class Reshape final : public Layer {
public:
    Reshape(Shape in, Shape out);
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Reshape>(*this); }
    std::string descriptor() const override;
    Shape in_shape() const override { return in_; }
    Shape out_shape() const override { return out_; }
    void forward(const float* in, float* out, std::size_t batch, std::vector<float>& scratch,
                 const ForwardMode& mode) const override;
    void backward(const float* in, const float* out, const float* dout, float* din, std::span<Tensor> grads,
                  std::size_t batch, const std::vector<float>& scratch) const override;

private:
    Shape in_, out_;
};

// Inverted dropout: kept units are scaled by 1 / (1 - rate).
class Dropout final : public Layer {
public:
    Dropout(Shape shape, float rate);
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Dropout>(*this); }
    std::string descriptor() const override;
    Shape in_shape() const override { return shape_; }
    Shape out_shape() const override { return shape_; }
    void forward(const float* in, float* out, std::size_t batch, std::vector<float>& scratch,
                 const ForwardMode& mode) const override;
    void backward(const float* in, const float* out, const float* dout, float* din, std::span<Tensor> grads,
                  std::size_t batch, const std::vector<float>& scratch) const override;
    float rate() const { return rate_; }

private:
    Shape shape_;
    float rate_;
};

// 2-D convolution over [C x H x W] with square kernel, stride and zero padding.
class Conv2d final : public Layer {
public:
    Conv2d(std::size_t channels, std::size_t height, std::size_t width, std::size_t out_channels,
           std::size_t kernel, std::size_t stride, std::size_t pad);
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }
    std::string descriptor() const override;
    Shape in_shape() const override;
    Shape out_shape() const override;
    std::span<Tensor> params() override { return params_; }
    std::span<const Tensor> params() const override { return params_; }
    void forward(const float* in, float* out, std::size_t batch, std::vector<float>& scratch,
                 const ForwardMode& mode) const override;
    void backward(const float* in, const float* out, const float* dout, float* din, std::span<Tensor> grads,
                  std::size_t batch, const std::vector<float>& scratch) const override;

private:
    std::size_t channels_, height_, width_, out_channels_, kernel_, stride_, pad_;
    std::vector<Tensor> params_;  // weight [OC x C*K*K], bias [OC]
};

// Transposed convolution (learned upsampling): output side (H - 1) * stride + kernel.
class Deconv2d final : public Layer {
public:
    Deconv2d(std::size_t channels, std::size_t height, std::size_t width, std::size_t out_channels,
             std::size_t kernel, std::size_t stride);
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Deconv2d>(*this); }
    std::string descriptor() const override;
    Shape in_shape() const override;
    Shape out_shape() const override;
    std::span<Tensor> params() override { return params_; }
    std::span<const Tensor> params() const override { return params_; }
    void forward(const float* in, float* out, std::size_t batch, std::vector<float>& scratch,
                 const ForwardMode& mode) const override;
    void backward(const float* in, const float* out, const float* dout, float* din, std::span<Tensor> grads,
                  std::size_t batch, const std::vector<float>& scratch) const override;

private:
    std::size_t channels_, height_, width_, out_channels_, kernel_, stride_;
    std::vector<Tensor> params_;  // weight [C x OC*K*K], bias [OC]
};

std::unique_ptr<Layer> layer_from_descriptor(const std::string& text);

// Activations recorded by a forward pass, consumed by backward.
struct Tape {
    std::size_t batch = 0;
    std::vector<std::vector<float>> activations;  // [0] is the input
    std::vector<std::vector<float>> scratch;
    std::span<const float> output() const { return activations.back(); }
};

class Network {
public:
    Network() = default;
    Network(Shape input_shape, std::vector<std::unique_ptr<Layer>> layers);
    Network(const Network& other);
    Network& operator=(const Network& other);
    Network(Network&&) noexcept = default;
    Network& operator=(Network&&) noexcept = default;

    const Shape& input_shape() const { return input_shape_; }
    std::size_t input_size() const { return shape_size(input_shape_); }
    Shape output_shape() const;
    std::size_t output_size() const { return shape_size(output_shape()); }
    std::size_t layer_count() const { return layers_.size(); }
    const Layer& layer(std::size_t i) const { return *layers_[i]; }
    Layer& layer(std::size_t i) { return *layers_[i]; }

    // Parameters in declaration order.
    std::vector<Tensor*> params();
    std::vector<const Tensor*> params() const;
    std::size_t param_count() const;
    // Zero tensors shaped like params(), for gradient accumulation.
    std::vector<Tensor> make_gradients() const;
    std::vector<std::string> descriptors() const;

    // Single-sample evaluation. input.shape() must equal input_shape().
    Tensor forward(const Tensor& input) const;

    void forward_batch(std::span<const float> input, std::size_t batch, Tape& tape,
                       const ForwardMode& mode = {}) const;
    // Reverse pass over a tape. Parameter gradients are accumulated into
    // grads (skipped when empty); the input gradient is written to din
    // (skipped when empty).
    void backward(const Tape& tape, std::span<const float> dout, std::span<Tensor> grads,
                  std::span<float> din) const;

    // Forward from layer `first` onward, for callers that cache a prefix.
    void forward_from(std::size_t first, std::span<const float> input, std::size_t batch, Tape& tape,
                      const ForwardMode& mode = {}) const;

private:
    Shape input_shape_;
    std::vector<std::unique_ptr<Layer>> layers_;
};

// Builds a network from a compact spec such as "affine:256,relu,affine:3" or
// "conv:16:3:1:0,relu,affine:128,reshape:8:4:4,deconv:1:3:2". Parameters are
// initialised from rng (He-uniform weights, zero biases).
Network build_network(const Shape& input_shape, const std::string& spec, Rng& rng);

// Reinitialise every parameter (He-uniform weights, zero biases).
void init_params(Network& net, Rng& rng);

enum class LossKind { mse, huber, cross_entropy };

struct LossResult {
    double value = 0.0;
    std::vector<float> grad;  // dLoss/dOutput
};

// Mean squared error over all elements.
LossResult mse_loss(std::span<const float> pred, std::span<const float> target);
// Mean Huber loss (delta = 1) over all elements.
LossResult huber_loss(std::span<const float> pred, std::span<const float> target);
// -log softmax(logits)[action].
LossResult cross_entropy_loss(std::span<const float> logits, std::size_t action);

using LossTarget = std::variant<std::size_t, Tensor>;

// dLoss/dInput for a single sample; parameters untouched.
Tensor input_gradient(const Network& net, const Tensor& input, LossKind loss, const LossTarget& target);

}  // namespace fg::nn
