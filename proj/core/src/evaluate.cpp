#include "firelite/evaluate.hpp"

#include <algorithm>
#include <cctype>
#include <thread>

#include "firelite/errors.hpp"
#include "firelite/vision.hpp"

namespace firelite {
namespace {

bool has_image_extension(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".jpg" || ext == ".jpeg" || ext == ".png";
}

void classify_one(const ModelGraph& graph, const WeightStore& weights, FileOutcome& item) {
    try {
        const auto bytes = read_file_bytes(item.path);
        const Prediction p = predict(graph, weights, preprocess(bytes));
        item.predicted = p.class_index;
        item.fire_probability = p.probabilities[0];
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Decode && e.kind() != ErrorKind::Io) throw;
        item.error = e.what();
    }
}

}  // namespace

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && has_image_extension(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

EvaluationResult evaluate_directory(const ModelGraph& graph, const WeightStore& weights,
                                    const std::filesystem::path& root, std::size_t threads) {
    EvaluationResult result;
    for (std::size_t cls = 0; cls < graph.class_names.size(); ++cls) {
        const auto dir = root / graph.class_names[cls];
        if (!std::filesystem::is_directory(dir)) {
            fail(ErrorKind::Layout, "dataset root '" + root.string() + "' has no '" + graph.class_names[cls] +
                                        "/' subdirectory");
        }
        for (auto& path : list_images(dir)) result.log.push_back({std::move(path), cls, std::nullopt, 0.0f, {}});
    }
    std::sort(result.log.begin(), result.log.end(),
              [](const FileOutcome& a, const FileOutcome& b) { return a.path < b.path; });

    const std::size_t n = result.log.size();
    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n));
    if (workers == 1) {
        for (auto& item : result.log) classify_one(graph, weights, item);
    } else {
        // Each worker owns a contiguous slice of the log; nothing is shared for writing.
        std::vector<std::exception_ptr> failures(workers);
        std::vector<std::thread> pool;
        const std::size_t chunk = (n + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w * chunk; i < std::min(n, (w + 1) * chunk); ++i)
                        classify_one(graph, weights, result.log[i]);
                } catch (...) {
                    failures[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (const auto& f : failures) {
            if (f) std::rethrow_exception(f);
        }
    }

    for (const auto& item : result.log) {
        if (item.predicted) {
            result.matrix.record(item.truth, *item.predicted);
        } else {
            ++result.warnings;
        }
    }
    result.metrics = compute_metrics(result.matrix);
    return result;
}

}  // namespace firelite
