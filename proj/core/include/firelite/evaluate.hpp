#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "firelite/metrics.hpp"
#include "firelite/model.hpp"
#include "firelite/weights_io.hpp"

namespace firelite {

struct FileOutcome {
    std::filesystem::path path;
    std::size_t truth = 0;
    std::optional<std::size_t> predicted;  // empty when the file was skipped
    float fire_probability = 0.0f;         // probability of class 0
    std::string error;
};

struct EvaluationResult {
    ConfusionMatrix matrix;
    MetricsReport metrics;
    std::vector<FileOutcome> log;  // lexicographic by path
    std::size_t warnings = 0;
};

/// Image files (.jpg, .jpeg, .png, any case) directly under `dir`, sorted.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

/// Classifies every image under root/<class_name>/ for each of the graph's
/// class names and scores it against the directory label. Undecodable files
/// are logged and counted as warnings. A missing class directory is a layout
/// error; no decodable images at all is a domain error. The result does not
/// depend on `threads`.
EvaluationResult evaluate_directory(const ModelGraph& graph, const WeightStore& weights,
                                    const std::filesystem::path& root, std::size_t threads = 1);

}  // namespace firelite
