#include "fg/nn/softmax.hpp"

#include <algorithm>
#include <cmath>

#include "fg/error.hpp"

namespace fg::nn {

std::size_t argmax(std::span<const float> values) {
    if (values.empty()) throw Error("argmax: empty input");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

std::size_t argmax(std::span<const double> values) {
    if (values.empty()) throw Error("argmax: empty input");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

std::size_t ActionDist::argmax() const { return nn::argmax(std::span<const double>(probs)); }

ActionDist softmax_temp(std::span<const float> logits, double temperature) {
    if (!(temperature > 0.0)) throw Error("softmax: temperature must be positive");
    if (logits.empty()) throw Error("softmax: empty logits");
    const double mx = *std::max_element(logits.begin(), logits.end());
    ActionDist d;
    d.probs.resize(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        d.probs[i] = std::exp((static_cast<double>(logits[i]) - mx) / temperature);
        z += d.probs[i];
    }
    for (double& p : d.probs) p /= z;
    return d;
}

}  // namespace fg::nn
