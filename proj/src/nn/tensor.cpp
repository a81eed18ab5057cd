#include "fg/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fg/error.hpp"

namespace fg::nn {

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
    for (std::size_t d : shape_) {
        if (d == 0) throw Error("tensor: zero-sized dimension in " + shape_string(shape_));
    }
    values_.assign(shape_size(shape_), 0.0f);
}

Tensor::Tensor(Shape shape, std::vector<float> values) : shape_(std::move(shape)), values_(std::move(values)) {
    for (std::size_t d : shape_) {
        if (d == 0) throw Error("tensor: zero-sized dimension in " + shape_string(shape_));
    }
    if (shape_size(shape_) != values_.size()) {
        throw Error("tensor: shape " + shape_string(shape_) + " does not match " +
                    std::to_string(values_.size()) + " values");
    }
    if (!all_finite()) throw Error("tensor: non-finite value");
}

void Tensor::fill(float v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](float v) { return std::isfinite(v); });
}

}  // namespace fg::nn
