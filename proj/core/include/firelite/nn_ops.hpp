#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "firelite/tensor.hpp"

namespace firelite {

enum class Padding { Same, Valid };

struct ConvSpec {
    std::size_t stride = 1;
    Padding padding = Padding::Same;

    friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

/// Zero padding applied before the first row/column of one spatial axis.
/// Same padding puts any odd remainder after the last row/column.
struct AxisGeometry {
    std::size_t out = 0;
    std::size_t pad_before = 0;
};

/// Output extent and leading pad for one spatial axis. Throws a shape error
/// when the kernel does not fit under Valid padding.
AxisGeometry conv_axis(std::size_t in, std::size_t kernel, const ConvSpec& spec);

struct BatchNormParams {
    std::vector<float> gamma;
    std::vector<float> beta;
    std::vector<float> moving_mean;
    std::vector<float> moving_var;
    float epsilon = 1e-3f;

    /// Channel count; throws a shape error when the four vectors disagree or
    /// a data error when moving_var + epsilon is not positive.
    std::size_t channels() const;
};

/// Which kernel axis indexes output channels when folding.
enum class KernelLayout {
    Conv,       // Kh x Kw x Cin x Cout
    Depthwise,  // Kh x Kw x C x 1
    Dense,      // Din x Dout
};

struct FoldedKernel {
    Tensor kernel;
    std::vector<float> bias;
};

// An empty bias span means "no bias".

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::span<const float> bias, const ConvSpec& spec);
Tensor depthwise_conv2d(const Tensor& input, const Tensor& kernel, std::span<const float> bias, const ConvSpec& spec);

/// Inference batch norm over the last axis of an N x H x W x C or N x C tensor.
Tensor batchnorm_infer(const Tensor& input, const BatchNormParams& bn);

/// Absorbs bn into the preceding linear layer: with s = gamma / sqrt(var + eps),
/// kernel' = s * kernel along the output-channel axis and
/// bias' = s * (bias - mean) + beta.
FoldedKernel fold_batchnorm(const Tensor& kernel, std::span<const float> bias, const BatchNormParams& bn,
                            KernelLayout layout);

Tensor relu(const Tensor& input);
Tensor relu6(const Tensor& input);

/// N x H x W x C -> N x C.
Tensor global_avg_pool(const Tensor& input);

/// N x Din times Din x Dout plus bias (length Dout, or empty).
Tensor dense(const Tensor& input, const Tensor& weights, std::span<const float> bias);

/// Row-wise softmax over the last axis of an N x K tensor.
Tensor softmax(const Tensor& input);

}  // namespace firelite
