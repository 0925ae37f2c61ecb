#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "firelite/firelite.hpp"

namespace {

using namespace firelite;

Tensor random_tensor(std::mt19937& rng, const Shape& shape, float scale = 1.0f) {
    std::uniform_real_distribution<float> dist(-scale, scale);
    std::vector<float> v(element_count(shape));
    for (auto& x : v) x = dist(rng);
    return Tensor::adopt(shape, std::move(v));
}

// Every weight the graph expects, He-scaled, with benign batch-norm stats.
WeightStore random_weights(const ModelGraph& graph) {
    std::mt19937 rng(1);
    WeightStore store;
    store.set_metadata(std::string(kMetaClassNames), "fire,nonfire");
    store.set_metadata(std::string(kMetaPreprocessing), std::string(kPreprocessingId));
    store.set_metadata(std::string(kMetaBnEpsilon), "0.001");
    for (const auto& layer : graph.layers) {
        for (const auto& w : expected_weights(layer)) {
            const std::string suffix = w.name.substr(w.name.rfind('.') + 1);
            if (suffix == "var" || suffix == "gamma") {
                store.add(w.name, Tensor::filled(w.shape, 1.0f));
            } else if (suffix == "kernel") {
                const std::size_t fan_in = element_count(w.shape) / w.shape.back();
                store.add(w.name, random_tensor(rng, w.shape, std::sqrt(6.0f / float(fan_in))));
            } else {
                store.add(w.name, random_tensor(rng, w.shape, 0.1f));
            }
        }
    }
    return store;
}

void BM_PointwiseConv(benchmark::State& state) {
    const std::size_t hw = state.range(0), cin = state.range(1), cout = state.range(2);
    std::mt19937 rng(2);
    const Tensor in = random_tensor(rng, {1, hw, hw, cin});
    const Tensor k = random_tensor(rng, {1, 1, cin, cout});
    for (auto _ : state) benchmark::DoNotOptimize(conv2d(in, k, {}, {1, Padding::Same}));
    state.SetItemsProcessed(state.iterations() * std::int64_t(hw * hw * cin * cout));
}
// Shapes of conv_pw_1, conv_pw_6 and conv_pw_13.
BENCHMARK(BM_PointwiseConv)->Args({112, 32, 64})->Args({14, 256, 512})->Args({7, 1024, 1024})->Unit(benchmark::kMillisecond);

void BM_DepthwiseConv(benchmark::State& state) {
    const std::size_t hw = state.range(0), c = state.range(1), stride = state.range(2);
    std::mt19937 rng(3);
    const Tensor in = random_tensor(rng, {1, hw, hw, c});
    const Tensor k = random_tensor(rng, {3, 3, c, 1});
    for (auto _ : state) benchmark::DoNotOptimize(depthwise_conv2d(in, k, {}, {stride, Padding::Same}));
    state.SetItemsProcessed(state.iterations() * std::int64_t(hw * hw * c * 9 / (stride * stride)));
}
BENCHMARK(BM_DepthwiseConv)->Args({112, 32, 1})->Args({112, 64, 2})->Args({14, 512, 1})->Unit(benchmark::kMillisecond);

void BM_Stem(benchmark::State& state) {
    std::mt19937 rng(4);
    const Tensor in = random_tensor(rng, {1, 224, 224, 3});
    const Tensor k = random_tensor(rng, {3, 3, 3, 32});
    for (auto _ : state) benchmark::DoNotOptimize(conv2d(in, k, {}, {2, Padding::Same}));
}
BENCHMARK(BM_Stem)->Unit(benchmark::kMillisecond);

void BM_Forward(benchmark::State& state) {
    const bool fold = state.range(0) != 0;
    const ModelGraph graph = build_firelite(kFireLiteInputSize, {"fire", "nonfire"});
    const WeightStore weights = random_weights(graph);
    const FoldedModel model = fold ? fold_batchnorms(graph, weights) : FoldedModel{graph, weights};
    std::mt19937 rng(5);
    const Tensor in = random_tensor(rng, {1, 224, 224, 3});
    for (auto _ : state) benchmark::DoNotOptimize(forward(model.graph, model.weights, in));
    state.SetLabel(fold ? "folded" : "unfolded");
}
BENCHMARK(BM_Forward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Preprocess(benchmark::State& state) {
    const std::size_t w = state.range(0), h = state.range(1);
    std::mt19937 rng(6);
    RawImage img{w, h, std::vector<std::uint8_t>(w * h * 3)};
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng());
    for (auto _ : state) benchmark::DoNotOptimize(image_to_tensor(resize_bilinear(img, 224, 224)));
}
BENCHMARK(BM_Preprocess)->Args({640, 480})->Args({1920, 1080})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
