#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fg::nn {

// Probability distribution over discrete actions.
struct ActionDist {
    std::vector<double> probs;

    std::size_t size() const { return probs.size(); }
    // Lowest index wins ties.
    std::size_t argmax() const;
    friend bool operator==(const ActionDist&, const ActionDist&) = default;
};

// Lowest index wins ties.
std::size_t argmax(std::span<const float> values);
std::size_t argmax(std::span<const double> values);

// softmax(logits / temperature), max-subtracted, accumulated in double.
ActionDist softmax_temp(std::span<const float> logits, double temperature);

}  // namespace fg::nn
