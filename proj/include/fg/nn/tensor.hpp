#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fg::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major float tensor. Values are always finite.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<float> values);

    const Shape& shape() const { return shape_; }
    std::size_t size() const { return values_.size(); }

    std::span<float> values() { return values_; }
    std::span<const float> values() const { return values_; }
    float* data() { return values_.data(); }
    const float* data() const { return values_.data(); }

    float& operator[](std::size_t i) { return values_[i]; }
    float operator[](std::size_t i) const { return values_[i]; }

    void fill(float v);
    bool all_finite() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<float> values_;
};

}  // namespace fg::nn
