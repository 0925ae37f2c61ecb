#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "firelite/nn_ops.hpp"
#include "firelite/tensor.hpp"
#include "firelite/weights_io.hpp"

namespace firelite {

enum class LayerKind { Conv, DepthwiseConv, BatchNorm, ReLU6, ReLU, GlobalAvgPool, Dense, Softmax };

std::string_view to_string(LayerKind kind) noexcept;

/// One node of the sequential graph. Shapes exclude the batch axis.
struct LayerSpec {
    std::string name;
    LayerKind kind = LayerKind::ReLU;
    ConvSpec conv;               // Conv, DepthwiseConv
    std::size_t kernel_size = 0; // square spatial kernel for Conv, DepthwiseConv
    std::size_t units = 0;       // output channels for Conv, output width for Dense
    bool use_bias = false;       // Conv, DepthwiseConv, Dense
    Shape input_shape;
    Shape output_shape;
    std::vector<std::string> weight_names;
    bool trainable = false;
};

struct WeightSpec {
    std::string name;
    Shape shape;
    bool trainable = false;
};

/// Tensors a layer consumes, in weight_names order, with the shapes and
/// trainability implied by the layer's hyperparameters. Batch-norm moving
/// statistics are never trainable.
std::vector<WeightSpec> expected_weights(const LayerSpec& layer);

/// Output shape of `layer` for a per-sample input shape; throws a shape error
/// when the layer cannot accept it.
Shape infer_output_shape(const LayerSpec& layer, const Shape& input);

struct ModelGraph {
    std::vector<LayerSpec> layers;
    Shape input_shape;
    std::vector<std::string> class_names;

    const LayerSpec* find(std::string_view name) const;
};

/// Static chain check: each layer's declared input is the previous layer's
/// declared output, declared outputs match inference, and class_names has two
/// entries that agree with the final width. Throws a shape or config error.
void check_shapes(const ModelGraph& graph);

inline constexpr std::size_t kFireLiteInputSize = 224;

/// MobileNet-v1 (alpha 1.0) feature extractor followed by the classification
/// head: GAP -> Dense(32) -> BatchNorm -> ReLU -> Dense(2) -> Softmax.
/// Trainable layers: conv_pw_13_bn, head_dense, head_bn, head_output.
/// Only 224x224 input is supported; anything else is a config error.
ModelGraph build_firelite(std::size_t input_size, std::vector<std::string> class_names);

/// Layers from `first_layer` to the end, fed by that layer's declared input.
ModelGraph subgraph_from(const ModelGraph& graph, std::string_view first_layer);

struct ParamCounts {
    std::size_t total = 0;
    std::size_t trainable = 0;
    std::size_t non_trainable = 0;
};

ParamCounts count_params(const ModelGraph& graph);

/// Invoked after each layer with that layer's output.
using LayerObserver = std::function<void(const LayerSpec&, const Tensor&)>;

/// Runs the graph on an N x (input_shape) tensor and returns the final
/// activations. Batch-norm epsilon is read from weight metadata: the key
/// "<layer>.epsilon" when present, otherwise "bn_epsilon". Throws a weight
/// error naming any missing or mis-shaped tensor.
Tensor forward(const ModelGraph& graph, const WeightStore& weights, const Tensor& input,
               const LayerObserver& observer = {});

struct Prediction {
    std::string label;
    std::size_t class_index = 0;
    std::vector<float> probabilities;
};

/// Argmax with ties resolved toward the lowest index.
Prediction make_prediction(const ModelGraph& graph, std::span<const float> probabilities);
Prediction predict(const ModelGraph& graph, const WeightStore& weights, const Tensor& image);

struct FoldedModel {
    ModelGraph graph;
    WeightStore weights;
};

/// Absorbs every BatchNorm that directly follows a Conv, DepthwiseConv or
/// Dense layer into that layer's kernel and bias.
FoldedModel fold_batchnorms(const ModelGraph& graph, const WeightStore& weights);

/// Batch-norm epsilon used for `layer_name`, from store metadata.
float bn_epsilon_for(const WeightStore& weights, std::string_view layer_name);

struct MemoryReport {
    std::size_t weight_bytes = 0;
    std::size_t peak_activation_bytes = 0;
    std::string peak_layer;

    std::size_t total_bytes() const noexcept { return weight_bytes + peak_activation_bytes; }
};

/// Weight bytes are summed over tensors the graph consumes. Peak activation is
/// analytic: with two ping-pong buffers a layer holds its input and output at
/// once, so the peak is the largest (input + output) pair along the chain.
/// Elementwise layers (batch norm, activations, softmax) run in place and
/// only hold their output.
MemoryReport analyze_memory(const ModelGraph& graph, const WeightStore& weights, std::size_t batch = 1);

}  // namespace firelite
