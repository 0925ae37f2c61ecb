#include "firelite/tensor.hpp"

#include <cmath>
#include <limits>

#include "firelite/errors.hpp"

namespace firelite {
namespace {

void check_shape(const Shape& shape) {
    if (shape.empty()) fail(ErrorKind::Shape, "tensor shape must have at least one dimension");
    std::size_t total = 1;
    for (std::size_t d : shape) {
        if (d == 0) fail(ErrorKind::Shape, "tensor dimension must be >= 1, got shape " + shape_to_string(shape));
        if (total > std::numeric_limits<std::size_t>::max() / d)
            fail(ErrorKind::Shape, "tensor shape overflows: " + shape_to_string(shape));
        total *= d;
    }
}

void check_finite(std::span<const float> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i]))
            fail(ErrorKind::Data, "non-finite tensor value at flat index " + std::to_string(i));
    }
}

}  // namespace

std::size_t element_count(const Shape& shape) noexcept {
    std::size_t total = 1;
    for (std::size_t d : shape) total *= d;
    return shape.empty() ? 0 : total;
}

std::string shape_to_string(const Shape& shape) {
    std::string out;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += 'x';
        out += std::to_string(shape[i]);
    }
    return out.empty() ? "[]" : out;
}

Tensor Tensor::filled(const Shape& shape, float value) {
    check_shape(shape);
    if (!std::isfinite(value)) fail(ErrorKind::Data, "fill value must be finite");
    return Tensor(shape, std::vector<float>(element_count(shape), value));
}

Tensor Tensor::from(const Shape& shape, std::span<const float> values) {
    return adopt(shape, std::vector<float>(values.begin(), values.end()));
}

Tensor Tensor::from(const Shape& shape, std::initializer_list<float> values) {
    return adopt(shape, std::vector<float>(values));
}

Tensor Tensor::adopt(Shape shape, std::vector<float>&& values) {
    check_shape(shape);
    if (values.size() != element_count(shape)) {
        fail(ErrorKind::Shape, "shape " + shape_to_string(shape) + " needs " + std::to_string(element_count(shape)) +
                                   " values, got " + std::to_string(values.size()));
    }
    check_finite(values);
    return Tensor(std::move(shape), std::move(values));
}

std::size_t Tensor::offset(std::span<const std::size_t> index) const {
    if (index.size() != shape_.size())
        fail(ErrorKind::Shape, "index rank " + std::to_string(index.size()) + " != tensor rank " +
                                   std::to_string(shape_.size()));
    std::size_t flat = 0;
    for (std::size_t axis = 0; axis < shape_.size(); ++axis) {
        if (index[axis] >= shape_[axis])
            fail(ErrorKind::Shape, "index out of range on axis " + std::to_string(axis));
        flat = flat * shape_[axis] + index[axis];
    }
    return flat;
}

float Tensor::at(std::initializer_list<std::size_t> index) const {
    return data_[offset(std::span<const std::size_t>(index.begin(), index.size()))];
}

Tensor Tensor::reshaped(const Shape& shape) const {
    check_shape(shape);
    if (element_count(shape) != data_.size())
        fail(ErrorKind::Shape, "cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
    return Tensor(shape, std::vector<float>(data_));
}

}  // namespace firelite
