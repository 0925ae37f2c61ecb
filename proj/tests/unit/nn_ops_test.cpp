#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "firelite/nn_ops.hpp"
#include "reference_ops.hpp"
#include "test_helpers.hpp"

namespace firelite {
namespace {

using testing::error_kind_of;
using testing::max_abs_diff;
using testing::random_batchnorm;
using testing::random_tensor;
using testing::random_vector;

std::vector<float> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

const ConvSpec kValid1{1, Padding::Valid};

TEST(ConvAxisTest, SameAndValidExtents) {
    EXPECT_EQ(conv_axis(224, 3, {2, Padding::Same}).out, 112u);
    EXPECT_EQ(conv_axis(224, 3, {2, Padding::Same}).pad_before, 0u);  // extra pad goes after
    EXPECT_EQ(conv_axis(7, 3, {1, Padding::Same}).pad_before, 1u);
    EXPECT_EQ(conv_axis(5, 3, {2, Padding::Same}).out, 3u);
    EXPECT_EQ(conv_axis(5, 3, {2, Padding::Same}).pad_before, 1u);
    EXPECT_EQ(conv_axis(5, 3, {2, Padding::Valid}).out, 2u);
    EXPECT_EQ(error_kind_of([] { conv_axis(2, 3, {1, Padding::Valid}); }), ErrorKind::Shape);
}

TEST(Conv2dTest, OneByOneKernelScales) {
    const Tensor out = conv2d(Tensor::filled({1, 3, 3, 1}, 1.0f), Tensor::filled({1, 1, 1, 1}, 2.0f), {}, kValid1);
    EXPECT_EQ(out.shape(), (Shape{1, 3, 3, 1}));
    for (float v : out.data()) EXPECT_EQ(v, 2.0f);
}

TEST(Conv2dTest, SumOfOneToNine) {
    const Tensor in = Tensor::from({1, 3, 3, 1}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    const Tensor out = conv2d(in, Tensor::filled({3, 3, 1, 1}, 1.0f), {}, kValid1);
    ASSERT_EQ(out.shape(), (Shape{1, 1, 1, 1}));
    EXPECT_EQ(out.at({0, 0, 0, 0}), 45.0f);
}

TEST(Conv2dTest, StrideTwoSameMatchesLoopOracle) {
    std::mt19937 rng(11);
    const Tensor in = random_tensor(rng, {1, 5, 5, 2});
    const Tensor k = random_tensor(rng, {3, 3, 2, 3});
    const Tensor out = conv2d(in, k, {}, {2, Padding::Same});
    EXPECT_EQ(out.shape(), (Shape{1, 3, 3, 3}));
    EXPECT_LE(max_abs_diff(out, testing::ref_conv2d(in, k, {}, 2, true)), 1e-5);
}

TEST(Conv2dTest, ChannelMismatchIsShapeError) {
    EXPECT_EQ(error_kind_of([] {
                  conv2d(Tensor::filled({1, 3, 3, 2}, 1.0f), Tensor::filled({1, 1, 3, 1}, 1.0f), {}, kValid1);
              }),
              ErrorKind::Shape);
}

TEST(Conv2dTest, KernelLargerThanValidInputIsShapeError) {
    EXPECT_EQ(error_kind_of([] {
                  conv2d(Tensor::filled({1, 2, 2, 1}, 1.0f), Tensor::filled({3, 3, 1, 1}, 1.0f), {}, kValid1);
              }),
              ErrorKind::Shape);
}

TEST(Conv2dTest, BiasLengthChecked) {
    const std::vector<float> bias{1.0f, 2.0f};
    EXPECT_EQ(error_kind_of([&] {
                  conv2d(Tensor::filled({1, 3, 3, 1}, 1.0f), Tensor::filled({1, 1, 1, 1}, 1.0f), bias, kValid1);
              }),
              ErrorKind::Shape);
}

TEST(DepthwiseTest, PerChannelSums) {
    std::vector<float> v;
    for (int i = 0; i < 9; ++i) {
        v.push_back(1.0f);
        v.push_back(2.0f);
    }
    const Tensor out =
        depthwise_conv2d(Tensor::from({1, 3, 3, 2}, v), Tensor::filled({3, 3, 2, 1}, 1.0f), {}, kValid1);
    ASSERT_EQ(out.shape(), (Shape{1, 1, 1, 2}));
    EXPECT_EQ(out.at({0, 0, 0, 0}), 9.0f);
    EXPECT_EQ(out.at({0, 0, 0, 1}), 18.0f);
}

TEST(DepthwiseTest, IdentityKernel) {
    std::mt19937 rng(3);
    const Tensor in = random_tensor(rng, {2, 4, 5, 6});
    EXPECT_EQ(depthwise_conv2d(in, Tensor::filled({1, 1, 6, 1}, 1.0f), {}, {1, Padding::Same}), in);
}

TEST(DepthwiseTest, StrideTwoSameMatchesLoopOracle) {
    std::mt19937 rng(5);
    const Tensor in = random_tensor(rng, {1, 7, 7, 4});
    const Tensor k = random_tensor(rng, {3, 3, 4, 1});
    const Tensor out = depthwise_conv2d(in, k, {}, {2, Padding::Same});
    EXPECT_EQ(out.shape(), (Shape{1, 4, 4, 4}));
    EXPECT_LE(max_abs_diff(out, testing::ref_depthwise(in, k, {}, 2, true)), 1e-5);
}

TEST(DepthwiseTest, KernelChannelMismatchIsShapeError) {
    EXPECT_EQ(error_kind_of([] {
                  depthwise_conv2d(Tensor::filled({1, 3, 3, 2}, 1.0f), Tensor::filled({3, 3, 3, 1}, 1.0f), {},
                                   kValid1);
              }),
              ErrorKind::Shape);
}

TEST(BatchNormTest, IdentityParameters) {
    const float eps = 1e-3f;
    const BatchNormParams bn{{1, 1}, {0, 0}, {0, 0}, {1 - eps, 1 - eps}, eps};
    std::mt19937 rng(1);
    const Tensor in = random_tensor(rng, {1, 2, 2, 2});
    const Tensor out = batchnorm_infer(in, bn);
    for (std::size_t i = 0; i < in.size(); ++i) EXPECT_NEAR(out.data()[i], in.data()[i], 1e-6);
}

TEST(BatchNormTest, HandArithmetic) {
    const float eps = 1e-3f;
    const BatchNormParams bn{{2}, {1}, {3}, {4 - eps}, eps};
    EXPECT_NEAR(batchnorm_infer(Tensor::from({1, 1}, {5}), bn).at({0, 0}), 3.0f, 1e-6);
}

TEST(BatchNormTest, MatchesScalarFormula) {
    std::mt19937 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t c = 1 + rng() % 8;
        const auto bn = random_batchnorm(rng, c);
        const Tensor in = random_tensor(rng, {2, 3, 3, c}, -3.0f, 3.0f);
        const Tensor out = batchnorm_infer(in, bn);
        for (std::size_t i = 0; i < in.size(); ++i) {
            const std::size_t ch = i % c;
            const double expect = double(bn.gamma[ch]) * (double(in.data()[i]) - bn.moving_mean[ch]) /
                                      std::sqrt(double(bn.moving_var[ch]) + bn.epsilon) +
                                  bn.beta[ch];
            ASSERT_NEAR(out.data()[i], expect, 1e-6 * std::max(1.0, std::abs(expect)));
        }
    }
}

TEST(BatchNormTest, ChannelMismatchIsShapeError) {
    const BatchNormParams bn{{1}, {0}, {0}, {1}, 1e-3f};
    EXPECT_EQ(error_kind_of([&] { batchnorm_infer(Tensor::filled({1, 2, 2, 3}, 1.0f), bn); }), ErrorKind::Shape);
}

TEST(FoldTest, IdentityFoldKeepsParameters) {
    const float eps = 1e-3f;
    const BatchNormParams bn{{1, 1}, {0, 0}, {0, 0}, {1 - eps, 1 - eps}, eps};
    std::mt19937 rng(2);
    const Tensor k = random_tensor(rng, {3, 3, 4, 2});
    const std::vector<float> bias{0.25f, -0.5f};
    const auto folded = fold_batchnorm(k, bias, bn, KernelLayout::Conv);
    for (std::size_t i = 0; i < k.size(); ++i) EXPECT_NEAR(folded.kernel.data()[i], k.data()[i], 1e-6);
    EXPECT_NEAR(folded.bias[0], 0.25f, 1e-6);
    EXPECT_NEAR(folded.bias[1], -0.5f, 1e-6);
}

TEST(FoldTest, NoBiasHandArithmetic) {
    const float eps = 1e-3f;
    const BatchNormParams bn{{2}, {0}, {1}, {4 - eps}, eps};
    const auto folded = fold_batchnorm(Tensor::filled({1, 1, 1, 1}, 1.0f), {}, bn, KernelLayout::Conv);
    EXPECT_NEAR(folded.bias[0], -1.0f, 1e-6);
    EXPECT_NEAR(folded.kernel.data()[0], 1.0f, 1e-6);
}

TEST(FoldTest, ChannelMismatchIsShapeError) {
    const BatchNormParams bn{{1, 1}, {0, 0}, {0, 0}, {1, 1}, 1e-3f};
    EXPECT_EQ(error_kind_of([&] { fold_batchnorm(Tensor::filled({1, 1, 2, 3}, 1.0f), {}, bn, KernelLayout::Conv); }),
              ErrorKind::Shape);
    EXPECT_EQ(error_kind_of([&] { fold_batchnorm(Tensor::filled({3, 3, 3, 1}, 1.0f), {}, bn, KernelLayout::Depthwise); }),
              ErrorKind::Shape);
}

// Largest elementwise gap relative to the reference's magnitude. Per-element
// ratios blow up wherever a channel output cancels to nearly zero.
double relative_gap(const Tensor& a, const Tensor& b) {
    double gap = 0.0, scale = 1e-6;
    for (std::size_t i = 0; i < a.size(); ++i) {
        gap = std::max(gap, std::abs(double(a.data()[i]) - b.data()[i]));
        scale = std::max(scale, std::abs(double(b.data()[i])));
    }
    return gap / scale;
}

// The unfolded pipeline is the oracle for every layout.
TEST(FoldTest, EquivalentToUnfoldedPipeline) {
    std::mt19937 rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t cin = 1 + rng() % 4, cout = 1 + rng() % 4, h = 3 + rng() % 5, w = 3 + rng() % 5;
        const ConvSpec spec{1 + rng() % 2, trial % 2 ? Padding::Same : Padding::Valid};
        const Tensor in = random_tensor(rng, {1, h, w, cin});
        const bool with_bias = trial % 3 == 0;

        const Tensor k = random_tensor(rng, {3, 3, cin, cout});
        const auto b = with_bias ? random_vector(rng, cout) : std::vector<float>{};
        const auto bn = random_batchnorm(rng, cout);
        const auto f = fold_batchnorm(k, b, bn, KernelLayout::Conv);
        const Tensor ref = batchnorm_infer(conv2d(in, k, b, spec), bn);
        ASSERT_LE(relative_gap(conv2d(in, f.kernel, f.bias, spec), ref), 1e-4) << "conv trial " << trial;

        const Tensor dk = random_tensor(rng, {3, 3, cin, 1});
        const auto dbn = random_batchnorm(rng, cin);
        const auto df = fold_batchnorm(dk, {}, dbn, KernelLayout::Depthwise);
        const Tensor dref = batchnorm_infer(depthwise_conv2d(in, dk, {}, spec), dbn);
        ASSERT_LE(relative_gap(depthwise_conv2d(in, df.kernel, df.bias, spec), dref), 1e-4) << "dw trial " << trial;

        const Tensor x = random_tensor(rng, {2, cin});
        const Tensor wk = random_tensor(rng, {cin, cout});
        const auto wb = random_vector(rng, cout);
        const auto wf = fold_batchnorm(wk, wb, bn, KernelLayout::Dense);
        ASSERT_LE(relative_gap(dense(x, wf.kernel, wf.bias), batchnorm_infer(dense(x, wk, wb), bn)), 1e-4);
    }
}

TEST(ActivationTest, Relu) {
    EXPECT_EQ(values(relu(Tensor::from({3}, {-1, 0, 2}))), (std::vector<float>{0, 0, 2}));
}

TEST(ActivationTest, Relu6) {
    EXPECT_EQ(values(relu6(Tensor::from({3}, {-1, 3, 9}))), (std::vector<float>{0, 3, 6}));
}

TEST(ActivationTest, Idempotent) {
    std::mt19937 rng(4);
    for (int i = 0; i < 20; ++i) {
        const Tensor x = random_tensor(rng, {4, 5}, -10.0f, 10.0f);
        EXPECT_EQ(relu(relu(x)), relu(x));
        EXPECT_EQ(relu6(relu6(x)), relu6(x));
    }
}

TEST(GlobalAvgPoolTest, MeanOfFour) {
    const Tensor out = global_avg_pool(Tensor::from({1, 2, 2, 1}, {1, 2, 3, 4}));
    ASSERT_EQ(out.shape(), (Shape{1, 1}));
    EXPECT_FLOAT_EQ(out.data()[0], 2.5f);
}

TEST(GlobalAvgPoolTest, ConstantInput) {
    const Tensor out = global_avg_pool(Tensor::filled({2, 3, 5, 4}, 1.75f));
    for (float v : out.data()) EXPECT_FLOAT_EQ(v, 1.75f);
}

TEST(GlobalAvgPoolTest, MatchesLoopOracle) {
    std::mt19937 rng(8);
    const Tensor in = random_tensor(rng, {2, 7, 7, 8});
    EXPECT_LE(max_abs_diff(global_avg_pool(in), testing::ref_global_avg_pool(in)), 1e-6);
}

TEST(GlobalAvgPoolTest, RejectsNonRank4) {
    EXPECT_EQ(error_kind_of([] { global_avg_pool(Tensor::filled({2, 3}, 1.0f)); }), ErrorKind::Shape);
}

TEST(DenseTest, IdentityWeights) {
    const Tensor in = Tensor::from({2, 2}, {1, 2, 3, 4});
    EXPECT_EQ(dense(in, Tensor::from({2, 2}, {1, 0, 0, 1}), std::vector<float>{0, 0}), in);
}

TEST(DenseTest, HandArithmetic) {
    const Tensor out = dense(Tensor::from({1, 2}, {1, 2}), Tensor::from({2, 2}, {3, 0, 0, 3}), std::vector<float>{1, 1});
    EXPECT_EQ(values(out), (std::vector<float>{4, 7}));
}

TEST(DenseTest, MatchesLoopOracle) {
    std::mt19937 rng(12);
    const Tensor in = random_tensor(rng, {4, 32});
    const Tensor w = random_tensor(rng, {32, 2});
    const auto b = random_vector(rng, 2);
    EXPECT_LE(max_abs_diff(dense(in, w, b), testing::ref_dense(in, w, b)), 1e-5);
}

TEST(DenseTest, InnerDimMismatchIsShapeError) {
    EXPECT_EQ(error_kind_of([] { dense(Tensor::filled({1, 3}, 1.0f), Tensor::filled({2, 2}, 1.0f), {}); }),
              ErrorKind::Shape);
}

TEST(SoftmaxTest, Symmetric) {
    EXPECT_EQ(values(softmax(Tensor::from({1, 2}, {0, 0}))), (std::vector<float>{0.5f, 0.5f}));
}

TEST(SoftmaxTest, LargeLogitsDoNotOverflow) {
    EXPECT_EQ(values(softmax(Tensor::from({1, 2}, {1000, 1000}))), (std::vector<float>{0.5f, 0.5f}));
}

TEST(SoftmaxTest, Analytic) {
    const Tensor out = softmax(Tensor::from({1, 2}, {std::log(1.0f), std::log(3.0f)}));
    EXPECT_NEAR(out.data()[0], 0.25f, 1e-6);
    EXPECT_NEAR(out.data()[1], 0.75f, 1e-6);
}

TEST(SoftmaxProperty, RowsAreDistributionsPreservingArgmax) {
    std::mt19937 rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = 2 + rng() % 6;
        const Tensor x = random_tensor(rng, {3, k}, -50.0f, 50.0f);
        const Tensor p = softmax(x);
        for (std::size_t r = 0; r < 3; ++r) {
            double sum = 0.0;
            std::size_t arg_x = 0, arg_p = 0;
            for (std::size_t j = 0; j < k; ++j) {
                const float v = p.at({r, j});
                ASSERT_GE(v, 0.0f);
                ASSERT_LE(v, 1.0f);
                sum += v;
                if (x.at({r, j}) > x.at({r, arg_x})) arg_x = j;
                if (v > p.at({r, arg_p})) arg_p = j;
            }
            ASSERT_NEAR(sum, 1.0, 1e-6);
            ASSERT_EQ(arg_x, arg_p);
        }
    }
}

// Property: output shapes follow the stated formulas for random valid shapes.
TEST(ShapeProperty, ConvOutputExtents) {
    std::mt19937 rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t h = 1 + rng() % 9, w = 1 + rng() % 9, c = 1 + rng() % 4, k = 1 + rng() % 3;
        const std::size_t stride = 1 + rng() % 2;
        const bool same = rng() % 2;
        if (!same && (k > h || k > w)) continue;
        const ConvSpec spec{stride, same ? Padding::Same : Padding::Valid};
        const Tensor in = random_tensor(rng, {1, h, w, c});
        const Tensor out = depthwise_conv2d(in, random_tensor(rng, {k, k, c, 1}), {}, spec);
        const std::size_t eh = same ? (h + stride - 1) / stride : (h - k) / stride + 1;
        const std::size_t ew = same ? (w + stride - 1) / stride : (w - k) / stride + 1;
        ASSERT_EQ(out.shape(), (Shape{1, eh, ew, c}));
    }
}

}  // namespace
}  // namespace firelite
