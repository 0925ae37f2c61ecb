#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace firelite {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape) noexcept;

/// Renders a shape as "7x7x1024".
std::string shape_to_string(const Shape& shape);

/// Dense row-major f32 tensor. Rank-4 tensors are laid out N x H x W x C.
///
/// A Tensor is immutable once constructed: every element is finite and every
/// dimension is at least one. Kernels build a std::vector and hand it over
/// with adopt(), which re-checks both invariants.
class Tensor {
public:
    Tensor() = default;

    /// Throws a shape error for an empty shape or a zero dimension.
    static Tensor filled(const Shape& shape, float value);

    /// Throws a shape error when values.size() != product(shape), and a data
    /// error on a non-finite value.
    static Tensor from(const Shape& shape, std::span<const float> values);
    static Tensor from(const Shape& shape, std::initializer_list<float> values);

    /// Same checks as from(), but takes ownership of the buffer.
    static Tensor adopt(Shape shape, std::vector<float>&& values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t byte_size() const noexcept { return data_.size() * sizeof(float); }

    std::span<const float> data() const noexcept { return data_; }
    const float* raw() const noexcept { return data_.data(); }

    /// Row-major flat offset of a full index; throws a shape error on rank
    /// mismatch or an out-of-range coordinate.
    std::size_t offset(std::span<const std::size_t> index) const;
    float at(std::initializer_list<std::size_t> index) const;

    /// Same data viewed under a different shape with the same element count.
    Tensor reshaped(const Shape& shape) const;

    friend bool operator==(const Tensor& a, const Tensor& b) = default;

private:
    Tensor(Shape shape, std::vector<float>&& data) : shape_(std::move(shape)), data_(std::move(data)) {}

    Shape shape_;
    std::vector<float> data_;
};

}  // namespace firelite
