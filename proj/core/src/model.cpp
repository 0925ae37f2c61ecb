#include "firelite/model.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <set>
#include <utility>

#include "firelite/errors.hpp"

namespace firelite {
namespace {

// MobileNet-v1 depthwise-separable blocks: (depthwise stride, pointwise filters).
constexpr std::array<std::pair<std::size_t, std::size_t>, 13> kMobileNetBlocks = {{
    {1, 64}, {2, 128}, {1, 128}, {2, 256}, {1, 256}, {2, 512}, {1, 512},
    {1, 512}, {1, 512}, {1, 512}, {1, 512}, {2, 1024}, {1, 1024},
}};
constexpr std::size_t kStemFilters = 32;
constexpr std::size_t kHeadUnits = 32;

std::size_t require_weight_count(const LayerSpec& layer, std::size_t minimum, std::size_t maximum) {
    const std::size_t n = layer.weight_names.size();
    if (n < minimum || n > maximum) {
        fail(ErrorKind::Config, "layer '" + layer.name + "' (" + std::string(to_string(layer.kind)) + ") lists " +
                                    std::to_string(n) + " weight tensors");
    }
    return n;
}

void require_input_rank(const LayerSpec& layer, const Shape& input, std::size_t rank) {
    if (input.size() != rank) {
        fail(ErrorKind::Shape, "layer '" + layer.name + "' expects a rank-" + std::to_string(rank) +
                                   " input, got " + shape_to_string(input));
    }
}

std::size_t channels_of(const LayerSpec& layer) {
    if (layer.input_shape.empty()) fail(ErrorKind::Shape, "layer '" + layer.name + "' has no declared input shape");
    return layer.input_shape.back();
}

class GraphBuilder {
public:
    explicit GraphBuilder(Shape input) : current_(std::move(input)) {}

    void conv(const std::string& name, std::size_t kernel, std::size_t filters, std::size_t stride) {
        LayerSpec l = make(name, LayerKind::Conv);
        l.conv = {stride, Padding::Same};
        l.kernel_size = kernel;
        l.units = filters;
        l.weight_names = {name + ".kernel"};
        push(std::move(l));
    }
    void depthwise(const std::string& name, std::size_t kernel, std::size_t stride) {
        LayerSpec l = make(name, LayerKind::DepthwiseConv);
        l.conv = {stride, Padding::Same};
        l.kernel_size = kernel;
        l.weight_names = {name + ".kernel"};
        push(std::move(l));
    }
    void batchnorm(const std::string& name) {
        LayerSpec l = make(name, LayerKind::BatchNorm);
        l.weight_names = {name + ".gamma", name + ".beta", name + ".mean", name + ".var"};
        push(std::move(l));
    }
    void dense(const std::string& name, std::size_t units) {
        LayerSpec l = make(name, LayerKind::Dense);
        l.units = units;
        l.use_bias = true;
        l.weight_names = {name + ".kernel", name + ".bias"};
        push(std::move(l));
    }
    void plain(const std::string& name, LayerKind kind) { push(make(name, kind)); }

    void mark_trainable(std::string_view name) {
        for (auto& l : layers_) {
            if (l.name == name) l.trainable = true;
        }
    }

    std::vector<LayerSpec> take() { return std::move(layers_); }

private:
    static LayerSpec make(const std::string& name, LayerKind kind) {
        LayerSpec l;
        l.name = name;
        l.kind = kind;
        return l;
    }

    void push(LayerSpec layer) {
        layer.input_shape = current_;
        layer.output_shape = infer_output_shape(layer, current_);
        current_ = layer.output_shape;
        layers_.push_back(std::move(layer));
    }

    Shape current_;
    std::vector<LayerSpec> layers_;
};

void check_weight(const LayerSpec& layer, const WeightSpec& spec, const Tensor& t) {
    if (t.shape() != spec.shape) {
        fail(ErrorKind::Weight, "weight tensor '" + spec.name + "' of layer '" + layer.name + "' has shape " +
                                    shape_to_string(t.shape()) + ", expected " + shape_to_string(spec.shape));
    }
}

std::span<const float> optional_bias(const LayerSpec& layer, const WeightStore& weights,
                                     const std::vector<WeightSpec>& specs) {
    if (!layer.use_bias) return {};
    const Tensor& b = weights.get(specs[1].name);
    check_weight(layer, specs[1], b);
    return b.data();
}

BatchNormParams load_batchnorm(const LayerSpec& layer, const WeightStore& weights) {
    const auto specs = expected_weights(layer);
    std::array<const Tensor*, 4> t{};
    for (std::size_t i = 0; i < 4; ++i) {
        t[i] = &weights.get(specs[i].name);
        check_weight(layer, specs[i], *t[i]);
    }
    auto vec = [](const Tensor* x) { return std::vector<float>(x->data().begin(), x->data().end()); };
    return {vec(t[0]), vec(t[1]), vec(t[2]), vec(t[3]), bn_epsilon_for(weights, layer.name)};
}

KernelLayout layout_of(LayerKind kind) {
    switch (kind) {
        case LayerKind::Conv: return KernelLayout::Conv;
        case LayerKind::DepthwiseConv: return KernelLayout::Depthwise;
        case LayerKind::Dense: return KernelLayout::Dense;
        default: break;
    }
    fail(ErrorKind::Config, "layer kind " + std::string(to_string(kind)) + " cannot absorb a batch norm");
}

}  // namespace

std::string_view to_string(LayerKind kind) noexcept {
    switch (kind) {
        case LayerKind::Conv: return "Conv";
        case LayerKind::DepthwiseConv: return "DepthwiseConv";
        case LayerKind::BatchNorm: return "BatchNorm";
        case LayerKind::ReLU6: return "ReLU6";
        case LayerKind::ReLU: return "ReLU";
        case LayerKind::GlobalAvgPool: return "GlobalAvgPool";
        case LayerKind::Dense: return "Dense";
        case LayerKind::Softmax: return "Softmax";
    }
    return "?";
}

std::vector<WeightSpec> expected_weights(const LayerSpec& layer) {
    const auto& names = layer.weight_names;
    switch (layer.kind) {
        case LayerKind::Conv: {
            require_weight_count(layer, layer.use_bias ? 2 : 1, layer.use_bias ? 2 : 1);
            std::vector<WeightSpec> out{
                {names[0], {layer.kernel_size, layer.kernel_size, channels_of(layer), layer.units}, layer.trainable}};
            if (layer.use_bias) out.push_back({names[1], {layer.units}, layer.trainable});
            return out;
        }
        case LayerKind::DepthwiseConv: {
            require_weight_count(layer, layer.use_bias ? 2 : 1, layer.use_bias ? 2 : 1);
            const std::size_t c = channels_of(layer);
            std::vector<WeightSpec> out{{names[0], {layer.kernel_size, layer.kernel_size, c, 1}, layer.trainable}};
            if (layer.use_bias) out.push_back({names[1], {c}, layer.trainable});
            return out;
        }
        case LayerKind::Dense: {
            require_weight_count(layer, layer.use_bias ? 2 : 1, layer.use_bias ? 2 : 1);
            std::vector<WeightSpec> out{{names[0], {channels_of(layer), layer.units}, layer.trainable}};
            if (layer.use_bias) out.push_back({names[1], {layer.units}, layer.trainable});
            return out;
        }
        case LayerKind::BatchNorm: {
            require_weight_count(layer, 4, 4);
            const std::size_t c = channels_of(layer);
            return {{names[0], {c}, layer.trainable},
                    {names[1], {c}, layer.trainable},
                    {names[2], {c}, false},
                    {names[3], {c}, false}};
        }
        default:
            require_weight_count(layer, 0, 0);
            return {};
    }
}

Shape infer_output_shape(const LayerSpec& layer, const Shape& input) {
    switch (layer.kind) {
        case LayerKind::Conv:
        case LayerKind::DepthwiseConv: {
            require_input_rank(layer, input, 3);
            const auto rows = conv_axis(input[0], layer.kernel_size, layer.conv);
            const auto cols = conv_axis(input[1], layer.kernel_size, layer.conv);
            const std::size_t c = layer.kind == LayerKind::Conv ? layer.units : input[2];
            if (c == 0) fail(ErrorKind::Shape, "layer '" + layer.name + "' has zero output channels");
            return {rows.out, cols.out, c};
        }
        case LayerKind::GlobalAvgPool:
            require_input_rank(layer, input, 3);
            return {input[2]};
        case LayerKind::Dense:
            require_input_rank(layer, input, 1);
            if (layer.units == 0) fail(ErrorKind::Shape, "dense layer '" + layer.name + "' has zero units");
            return {layer.units};
        case LayerKind::Softmax:
            require_input_rank(layer, input, 1);
            return input;
        case LayerKind::BatchNorm:
            if (input.size() != 1 && input.size() != 3) {
                fail(ErrorKind::Shape, "batch norm '" + layer.name + "' expects H x W x C or C, got " +
                                           shape_to_string(input));
            }
            return input;
        case LayerKind::ReLU:
        case LayerKind::ReLU6:
            return input;
    }
    fail(ErrorKind::Config, "unknown layer kind");
}

const LayerSpec* ModelGraph::find(std::string_view name) const {
    for (const auto& l : layers) {
        if (l.name == name) return &l;
    }
    return nullptr;
}

void check_shapes(const ModelGraph& graph) {
    if (graph.layers.empty()) fail(ErrorKind::Config, "graph has no layers");
    if (graph.class_names.size() != 2) {
        fail(ErrorKind::Config, "graph needs exactly 2 class names, got " + std::to_string(graph.class_names.size()));
    }
    Shape current = graph.input_shape;
    std::set<std::string> names;
    for (const auto& layer : graph.layers) {
        if (!names.insert(layer.name).second) fail(ErrorKind::Config, "duplicate layer name '" + layer.name + "'");
        if (layer.input_shape != current) {
            fail(ErrorKind::Shape, "layer '" + layer.name + "' declares input " + shape_to_string(layer.input_shape) +
                                       " but receives " + shape_to_string(current));
        }
        const Shape inferred = infer_output_shape(layer, current);
        if (inferred != layer.output_shape) {
            fail(ErrorKind::Shape, "layer '" + layer.name + "' declares output " +
                                       shape_to_string(layer.output_shape) + " but produces " +
                                       shape_to_string(inferred));
        }
        expected_weights(layer);
        current = inferred;
    }
    if (current != Shape{graph.class_names.size()}) {
        fail(ErrorKind::Shape, "graph output " + shape_to_string(current) + " does not match " +
                                   std::to_string(graph.class_names.size()) + " classes");
    }
}

ModelGraph build_firelite(std::size_t input_size, std::vector<std::string> class_names) {
    if (input_size != kFireLiteInputSize) {
        fail(ErrorKind::Config, "unsupported input size " + std::to_string(input_size) + " (only " +
                                    std::to_string(kFireLiteInputSize) + " is supported)");
    }
    if (class_names.size() != 2) {
        fail(ErrorKind::Config, "FireLite classifies exactly 2 classes, got " + std::to_string(class_names.size()));
    }

    GraphBuilder b({input_size, input_size, 3});
    b.conv("conv1", 3, kStemFilters, 2);
    b.batchnorm("conv1_bn");
    b.plain("conv1_relu", LayerKind::ReLU6);
    for (std::size_t i = 0; i < kMobileNetBlocks.size(); ++i) {
        const auto [stride, filters] = kMobileNetBlocks[i];
        const std::string id = std::to_string(i + 1);
        b.depthwise("conv_dw_" + id, 3, stride);
        b.batchnorm("conv_dw_" + id + "_bn");
        b.plain("conv_dw_" + id + "_relu", LayerKind::ReLU6);
        b.conv("conv_pw_" + id, 1, filters, 1);
        b.batchnorm("conv_pw_" + id + "_bn");
        b.plain("conv_pw_" + id + "_relu", LayerKind::ReLU6);
    }
    b.plain("global_pool", LayerKind::GlobalAvgPool);
    b.dense("head_dense", kHeadUnits);
    b.batchnorm("head_bn");
    b.plain("head_relu", LayerKind::ReLU);
    // Dropout sits here during training; it is the identity at inference.
    b.dense("head_output", class_names.size());
    b.plain("head_softmax", LayerKind::Softmax);

    // The two top backbone layers (final BN and its parameter-free activation)
    // plus the whole head.
    for (std::string_view name : {"conv_pw_13_bn", "conv_pw_13_relu", "head_dense", "head_bn", "head_output"})
        b.mark_trainable(name);

    ModelGraph graph{b.take(), {input_size, input_size, 3}, std::move(class_names)};
    check_shapes(graph);
    return graph;
}

ModelGraph subgraph_from(const ModelGraph& graph, std::string_view first_layer) {
    const auto it = std::find_if(graph.layers.begin(), graph.layers.end(),
                                 [&](const LayerSpec& l) { return l.name == first_layer; });
    if (it == graph.layers.end()) fail(ErrorKind::Config, "no layer named '" + std::string(first_layer) + "'");
    return {std::vector<LayerSpec>(it, graph.layers.end()), it->input_shape, graph.class_names};
}

ParamCounts count_params(const ModelGraph& graph) {
    ParamCounts counts;
    for (const auto& layer : graph.layers) {
        for (const auto& w : expected_weights(layer)) {
            const std::size_t n = element_count(w.shape);
            counts.total += n;
            (w.trainable ? counts.trainable : counts.non_trainable) += n;
        }
    }
    return counts;
}

float bn_epsilon_for(const WeightStore& weights, std::string_view layer_name) {
    auto value = weights.metadata_value(std::string(layer_name) + ".epsilon");
    if (!value) value = weights.metadata_value(kMetaBnEpsilon);
    if (!value) fail(ErrorKind::Weight, "no batch-norm epsilon for layer '" + std::string(layer_name) + "'");
    float eps = 0.0f;
    const auto [ptr, ec] = std::from_chars(value->data(), value->data() + value->size(), eps);
    if (ec != std::errc() || ptr != value->data() + value->size() || !(eps > 0.0f) || !std::isfinite(eps)) {
        fail(ErrorKind::Weight, "invalid batch-norm epsilon '" + *value + "' for layer '" + std::string(layer_name) +
                                    "'");
    }
    return eps;
}

Tensor forward(const ModelGraph& graph, const WeightStore& weights, const Tensor& input,
               const LayerObserver& observer) {
    if (input.rank() != graph.input_shape.size() + 1 ||
        !std::equal(graph.input_shape.begin(), graph.input_shape.end(), input.shape().begin() + 1)) {
        fail(ErrorKind::Shape, "model expects N x " + shape_to_string(graph.input_shape) + " input, got " +
                                   shape_to_string(input.shape()));
    }

    const Tensor* current = &input;
    Tensor holder;
    for (const auto& layer : graph.layers) {
        const auto specs = expected_weights(layer);
        auto kernel = [&]() -> const Tensor& {
            const Tensor& k = weights.get(specs[0].name);
            check_weight(layer, specs[0], k);
            return k;
        };
        switch (layer.kind) {
            case LayerKind::Conv:
                holder = conv2d(*current, kernel(), optional_bias(layer, weights, specs), layer.conv);
                break;
            case LayerKind::DepthwiseConv:
                holder = depthwise_conv2d(*current, kernel(), optional_bias(layer, weights, specs), layer.conv);
                break;
            case LayerKind::Dense:
                holder = dense(*current, kernel(), optional_bias(layer, weights, specs));
                break;
            case LayerKind::BatchNorm:
                holder = batchnorm_infer(*current, load_batchnorm(layer, weights));
                break;
            case LayerKind::ReLU:
                holder = relu(*current);
                break;
            case LayerKind::ReLU6:
                holder = relu6(*current);
                break;
            case LayerKind::GlobalAvgPool:
                holder = global_avg_pool(*current);
                break;
            case LayerKind::Softmax:
                holder = softmax(*current);
                break;
        }
        current = &holder;
        if (observer) observer(layer, holder);
    }
    return holder.size() ? std::move(holder) : input;
}

Prediction make_prediction(const ModelGraph& graph, std::span<const float> probabilities) {
    if (probabilities.size() != graph.class_names.size() || probabilities.empty()) {
        fail(ErrorKind::Shape, "got " + std::to_string(probabilities.size()) + " probabilities for " +
                                   std::to_string(graph.class_names.size()) + " classes");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < probabilities.size(); ++i) {
        if (probabilities[i] > probabilities[best]) best = i;
    }
    return {graph.class_names[best], best, std::vector<float>(probabilities.begin(), probabilities.end())};
}

Prediction predict(const ModelGraph& graph, const WeightStore& weights, const Tensor& image) {
    if (image.rank() == 0 || image.dim(0) != 1) fail(ErrorKind::Shape, "predict takes a single image (batch of 1)");
    const Tensor probs = forward(graph, weights, image);
    return make_prediction(graph, probs.data());
}

FoldedModel fold_batchnorms(const ModelGraph& graph, const WeightStore& weights) {
    FoldedModel folded;
    folded.graph.input_shape = graph.input_shape;
    folded.graph.class_names = graph.class_names;
    for (const auto& [key, value] : weights.metadata()) folded.weights.set_metadata(key, value);

    for (std::size_t i = 0; i < graph.layers.size(); ++i) {
        const LayerSpec& layer = graph.layers[i];
        const bool linear = layer.kind == LayerKind::Conv || layer.kind == LayerKind::DepthwiseConv ||
                            layer.kind == LayerKind::Dense;
        const bool bn_next = i + 1 < graph.layers.size() && graph.layers[i + 1].kind == LayerKind::BatchNorm;
        const auto specs = expected_weights(layer);

        if (!(linear && bn_next)) {
            folded.graph.layers.push_back(layer);
            for (const auto& spec : specs) {
                const Tensor& t = weights.get(spec.name);
                check_weight(layer, spec, t);
                folded.weights.add(spec.name, t);
            }
            continue;
        }

        const LayerSpec& bn_layer = graph.layers[i + 1];
        const Tensor& k = weights.get(specs[0].name);
        check_weight(layer, specs[0], k);
        auto result = fold_batchnorm(k, optional_bias(layer, weights, specs), load_batchnorm(bn_layer, weights),
                                     layout_of(layer.kind));

        LayerSpec merged = layer;
        merged.use_bias = true;
        merged.output_shape = bn_layer.output_shape;
        merged.weight_names = {layer.name + ".kernel", layer.name + ".bias"};
        merged.trainable = layer.trainable || bn_layer.trainable;
        const std::size_t channels = result.bias.size();
        folded.weights.add(merged.weight_names[0], std::move(result.kernel));
        folded.weights.add(merged.weight_names[1], Tensor::adopt({channels}, std::move(result.bias)));
        folded.graph.layers.push_back(std::move(merged));
        ++i;
    }
    check_shapes(folded.graph);
    return folded;
}

namespace {

bool is_elementwise(LayerKind kind) {
    return kind == LayerKind::BatchNorm || kind == LayerKind::ReLU || kind == LayerKind::ReLU6 ||
           kind == LayerKind::Softmax;
}

}  // namespace

MemoryReport analyze_memory(const ModelGraph& graph, const WeightStore& weights, std::size_t batch) {
    MemoryReport report;
    std::set<std::string> counted;
    for (const auto& layer : graph.layers) {
        for (const auto& spec : expected_weights(layer)) {
            if (!counted.insert(spec.name).second) continue;
            const Tensor* t = weights.find(spec.name);
            report.weight_bytes += (t ? t->size() : element_count(spec.shape)) * sizeof(float);
        }
    }
    std::size_t previous = batch * element_count(graph.input_shape) * sizeof(float);
    for (const auto& layer : graph.layers) {
        const std::size_t out = batch * element_count(layer.output_shape) * sizeof(float);
        const std::size_t live = is_elementwise(layer.kind) ? out : previous + out;
        if (live > report.peak_activation_bytes) {
            report.peak_activation_bytes = live;
            report.peak_layer = layer.name;
        }
        previous = out;
    }
    return report;
}

}  // namespace firelite
