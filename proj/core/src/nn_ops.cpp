#include "firelite/nn_ops.hpp"

#include <algorithm>
#include <cmath>

#include "firelite/errors.hpp"

namespace firelite {
namespace {

// Output pixels accumulated together in the pointwise path so each weight row
// is reused from cache.
constexpr std::size_t kPointwiseTile = 8;

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank) {
        fail(ErrorKind::Shape, std::string(what) + " must have rank " + std::to_string(rank) + ", got " +
                                   shape_to_string(t.shape()));
    }
}

void require_bias(std::span<const float> bias, std::size_t channels, const char* what) {
    if (!bias.empty() && bias.size() != channels) {
        fail(ErrorKind::Shape, std::string(what) + " bias has " + std::to_string(bias.size()) +
                                   " entries, expected " + std::to_string(channels));
    }
}

void init_with_bias(float* dst, std::span<const float> bias, std::size_t channels) {
    if (bias.empty()) {
        std::fill(dst, dst + channels, 0.0f);
    } else {
        std::copy(bias.begin(), bias.end(), dst);
    }
}

struct ConvGeometry {
    std::size_t batch, in_h, in_w, in_c;
    std::size_t k_h, k_w;
    AxisGeometry rows, cols;
};

ConvGeometry make_geometry(const Tensor& input, const Tensor& kernel, const ConvSpec& spec) {
    ConvGeometry g{};
    g.batch = input.dim(0);
    g.in_h = input.dim(1);
    g.in_w = input.dim(2);
    g.in_c = input.dim(3);
    g.k_h = kernel.dim(0);
    g.k_w = kernel.dim(1);
    g.rows = conv_axis(g.in_h, g.k_h, spec);
    g.cols = conv_axis(g.in_w, g.k_w, spec);
    return g;
}

// 1x1 stride-1 convolution is a [pixels x Cin] * [Cin x Cout] product.
void pointwise(const float* in, const float* w, std::span<const float> bias, float* out, std::size_t pixels,
               std::size_t cin, std::size_t cout) {
    for (std::size_t p0 = 0; p0 < pixels; p0 += kPointwiseTile) {
        const std::size_t tile = std::min(kPointwiseTile, pixels - p0);
        float* acc = out + p0 * cout;
        for (std::size_t p = 0; p < tile; ++p) init_with_bias(acc + p * cout, bias, cout);
        for (std::size_t ci = 0; ci < cin; ++ci) {
            const float* wrow = w + ci * cout;
            for (std::size_t p = 0; p < tile; ++p) {
                const float xv = in[(p0 + p) * cin + ci];
                float* dst = acc + p * cout;
                for (std::size_t co = 0; co < cout; ++co) dst[co] += xv * wrow[co];
            }
        }
    }
}

Tensor map_elements(const Tensor& input, float (*fn)(float)) {
    std::vector<float> out(input.data().begin(), input.data().end());
    for (float& v : out) v = fn(v);
    return Tensor::adopt(input.shape(), std::move(out));
}

}  // namespace

AxisGeometry conv_axis(std::size_t in, std::size_t kernel, const ConvSpec& spec) {
    if (spec.stride == 0) fail(ErrorKind::Shape, "convolution stride must be >= 1");
    if (kernel == 0) fail(ErrorKind::Shape, "convolution kernel extent must be >= 1");
    if (spec.padding == Padding::Valid) {
        if (kernel > in) {
            fail(ErrorKind::Shape, "kernel extent " + std::to_string(kernel) + " exceeds input extent " +
                                       std::to_string(in) + " under Valid padding");
        }
        return {(in - kernel) / spec.stride + 1, 0};
    }
    const std::size_t out = (in + spec.stride - 1) / spec.stride;
    const std::size_t needed = (out - 1) * spec.stride + kernel;
    const std::size_t pad_total = needed > in ? needed - in : 0;
    return {out, pad_total / 2};
}

std::size_t BatchNormParams::channels() const {
    const std::size_t c = gamma.size();
    if (beta.size() != c || moving_mean.size() != c || moving_var.size() != c || c == 0) {
        fail(ErrorKind::Shape, "batch-norm parameter vectors must share one non-zero length");
    }
    if (!(epsilon > 0.0f) || !std::isfinite(epsilon)) fail(ErrorKind::Data, "batch-norm epsilon must be positive");
    for (float v : moving_var) {
        if (!(v + epsilon > 0.0f)) fail(ErrorKind::Data, "batch-norm moving_var + epsilon must be positive");
    }
    return c;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::span<const float> bias, const ConvSpec& spec) {
    require_rank(input, 4, "conv2d input");
    require_rank(kernel, 4, "conv2d kernel");
    if (kernel.dim(2) != input.dim(3)) {
        fail(ErrorKind::Shape, "conv2d kernel expects " + std::to_string(kernel.dim(2)) + " input channels, input has " +
                                   std::to_string(input.dim(3)));
    }
    const std::size_t cout = kernel.dim(3);
    require_bias(bias, cout, "conv2d");
    const ConvGeometry g = make_geometry(input, kernel, spec);

    std::vector<float> out(g.batch * g.rows.out * g.cols.out * cout);
    const float* in = input.raw();
    const float* w = kernel.raw();

    if (g.k_h == 1 && g.k_w == 1 && spec.stride == 1) {
        pointwise(in, w, bias, out.data(), g.batch * g.in_h * g.in_w, g.in_c, cout);
        return Tensor::adopt({g.batch, g.rows.out, g.cols.out, cout}, std::move(out));
    }

    for (std::size_t n = 0; n < g.batch; ++n) {
        for (std::size_t oh = 0; oh < g.rows.out; ++oh) {
            for (std::size_t ow = 0; ow < g.cols.out; ++ow) {
                float* acc = out.data() + ((n * g.rows.out + oh) * g.cols.out + ow) * cout;
                init_with_bias(acc, bias, cout);
                for (std::size_t kh = 0; kh < g.k_h; ++kh) {
                    const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * spec.stride + kh) -
                                              static_cast<std::ptrdiff_t>(g.rows.pad_before);
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
                    for (std::size_t kw = 0; kw < g.k_w; ++kw) {
                        const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * spec.stride + kw) -
                                                  static_cast<std::ptrdiff_t>(g.cols.pad_before);
                        if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
                        const float* x = in + ((n * g.in_h + ih) * g.in_w + iw) * g.in_c;
                        const float* wk = w + (kh * g.k_w + kw) * g.in_c * cout;
                        for (std::size_t ci = 0; ci < g.in_c; ++ci) {
                            const float xv = x[ci];
                            const float* wrow = wk + ci * cout;
                            for (std::size_t co = 0; co < cout; ++co) acc[co] += xv * wrow[co];
                        }
                    }
                }
            }
        }
    }
    return Tensor::adopt({g.batch, g.rows.out, g.cols.out, cout}, std::move(out));
}

Tensor depthwise_conv2d(const Tensor& input, const Tensor& kernel, std::span<const float> bias,
                        const ConvSpec& spec) {
    require_rank(input, 4, "depthwise_conv2d input");
    require_rank(kernel, 4, "depthwise_conv2d kernel");
    const std::size_t c = input.dim(3);
    if (kernel.dim(2) != c || kernel.dim(3) != 1) {
        fail(ErrorKind::Shape, "depthwise kernel " + shape_to_string(kernel.shape()) + " does not match " +
                                   std::to_string(c) + " input channels (expected Kh x Kw x C x 1)");
    }
    require_bias(bias, c, "depthwise_conv2d");
    const ConvGeometry g = make_geometry(input, kernel, spec);

    std::vector<float> out(g.batch * g.rows.out * g.cols.out * c);
    const float* in = input.raw();
    const float* w = kernel.raw();
    for (std::size_t n = 0; n < g.batch; ++n) {
        for (std::size_t oh = 0; oh < g.rows.out; ++oh) {
            for (std::size_t ow = 0; ow < g.cols.out; ++ow) {
                float* acc = out.data() + ((n * g.rows.out + oh) * g.cols.out + ow) * c;
                init_with_bias(acc, bias, c);
                for (std::size_t kh = 0; kh < g.k_h; ++kh) {
                    const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * spec.stride + kh) -
                                              static_cast<std::ptrdiff_t>(g.rows.pad_before);
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
                    for (std::size_t kw = 0; kw < g.k_w; ++kw) {
                        const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * spec.stride + kw) -
                                                  static_cast<std::ptrdiff_t>(g.cols.pad_before);
                        if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
                        const float* x = in + ((n * g.in_h + ih) * g.in_w + iw) * c;
                        const float* wk = w + (kh * g.k_w + kw) * c;
                        for (std::size_t ch = 0; ch < c; ++ch) acc[ch] += x[ch] * wk[ch];
                    }
                }
            }
        }
    }
    return Tensor::adopt({g.batch, g.rows.out, g.cols.out, c}, std::move(out));
}

Tensor batchnorm_infer(const Tensor& input, const BatchNormParams& bn) {
    if (input.rank() != 4 && input.rank() != 2) {
        fail(ErrorKind::Shape, "batch norm expects N x H x W x C or N x C, got " + shape_to_string(input.shape()));
    }
    const std::size_t c = bn.channels();
    if (input.shape().back() != c) {
        fail(ErrorKind::Shape, "batch norm has " + std::to_string(c) + " channels, input has " +
                                   std::to_string(input.shape().back()));
    }
    std::vector<float> scale(c);
    for (std::size_t ch = 0; ch < c; ++ch) scale[ch] = bn.gamma[ch] / std::sqrt(bn.moving_var[ch] + bn.epsilon);

    std::vector<float> out(input.data().begin(), input.data().end());
    for (std::size_t i = 0; i < out.size(); i += c) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            out[i + ch] = scale[ch] * (out[i + ch] - bn.moving_mean[ch]) + bn.beta[ch];
        }
    }
    return Tensor::adopt(input.shape(), std::move(out));
}

FoldedKernel fold_batchnorm(const Tensor& kernel, std::span<const float> bias, const BatchNormParams& bn,
                            KernelLayout layout) {
    const std::size_t c = bn.channels();
    std::size_t axis = 0;
    switch (layout) {
        case KernelLayout::Conv:
            require_rank(kernel, 4, "conv kernel");
            axis = 3;
            break;
        case KernelLayout::Depthwise:
            require_rank(kernel, 4, "depthwise kernel");
            if (kernel.dim(3) != 1) fail(ErrorKind::Shape, "depthwise kernel must have trailing dimension 1");
            axis = 2;
            break;
        case KernelLayout::Dense:
            require_rank(kernel, 2, "dense kernel");
            axis = 1;
            break;
    }
    if (kernel.dim(axis) != c) {
        fail(ErrorKind::Shape, "batch norm has " + std::to_string(c) + " channels, kernel " +
                                   shape_to_string(kernel.shape()) + " has " + std::to_string(kernel.dim(axis)) +
                                   " output channels");
    }
    require_bias(bias, c, "folded layer");

    std::vector<float> scale(c);
    for (std::size_t ch = 0; ch < c; ++ch) scale[ch] = bn.gamma[ch] / std::sqrt(bn.moving_var[ch] + bn.epsilon);

    // Output channel of flat index i is (i / inner) % c, inner = product of axes after `axis`.
    std::size_t inner = 1;
    for (std::size_t a = axis + 1; a < kernel.rank(); ++a) inner *= kernel.dim(a);

    std::vector<float> w(kernel.data().begin(), kernel.data().end());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] *= scale[(i / inner) % c];

    std::vector<float> b(c);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const float orig = bias.empty() ? 0.0f : bias[ch];
        b[ch] = scale[ch] * (orig - bn.moving_mean[ch]) + bn.beta[ch];
    }
    return {Tensor::adopt(kernel.shape(), std::move(w)), std::move(b)};
}

Tensor relu(const Tensor& input) {
    return map_elements(input, [](float v) { return v > 0.0f ? v : 0.0f; });
}

Tensor relu6(const Tensor& input) {
    return map_elements(input, [](float v) { return std::clamp(v, 0.0f, 6.0f); });
}

Tensor global_avg_pool(const Tensor& input) {
    require_rank(input, 4, "global_avg_pool input");
    const std::size_t n = input.dim(0), hw = input.dim(1) * input.dim(2), c = input.dim(3);
    std::vector<double> sums(c);
    std::vector<float> out(n * c);
    for (std::size_t b = 0; b < n; ++b) {
        std::fill(sums.begin(), sums.end(), 0.0);
        const float* x = input.raw() + b * hw * c;
        for (std::size_t p = 0; p < hw; ++p) {
            for (std::size_t ch = 0; ch < c; ++ch) sums[ch] += x[p * c + ch];
        }
        for (std::size_t ch = 0; ch < c; ++ch) out[b * c + ch] = static_cast<float>(sums[ch] / static_cast<double>(hw));
    }
    return Tensor::adopt({n, c}, std::move(out));
}

Tensor dense(const Tensor& input, const Tensor& weights, std::span<const float> bias) {
    require_rank(input, 2, "dense input");
    require_rank(weights, 2, "dense weights");
    const std::size_t n = input.dim(0), din = input.dim(1), dout = weights.dim(1);
    if (weights.dim(0) != din) {
        fail(ErrorKind::Shape, "dense weights " + shape_to_string(weights.shape()) + " do not accept input width " +
                                   std::to_string(din));
    }
    require_bias(bias, dout, "dense");
    std::vector<float> out(n * dout);
    const float* x = input.raw();
    const float* w = weights.raw();
    for (std::size_t r = 0; r < n; ++r) {
        float* acc = out.data() + r * dout;
        init_with_bias(acc, bias, dout);
        for (std::size_t k = 0; k < din; ++k) {
            const float xv = x[r * din + k];
            const float* wrow = w + k * dout;
            for (std::size_t j = 0; j < dout; ++j) acc[j] += xv * wrow[j];
        }
    }
    return Tensor::adopt({n, dout}, std::move(out));
}

Tensor softmax(const Tensor& input) {
    require_rank(input, 2, "softmax input");
    const std::size_t n = input.dim(0), k = input.dim(1);
    std::vector<float> out(input.data().begin(), input.data().end());
    for (std::size_t r = 0; r < n; ++r) {
        float* row = out.data() + r * k;
        const float peak = *std::max_element(row, row + k);
        double total = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            row[j] = std::exp(row[j] - peak);
            total += row[j];
        }
        for (std::size_t j = 0; j < k; ++j) row[j] = static_cast<float>(row[j] / total);
    }
    return Tensor::adopt(input.shape(), std::move(out));
}

}  // namespace firelite
