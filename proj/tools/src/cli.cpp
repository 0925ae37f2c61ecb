#include "firelite_cli/cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif
#include <nlohmann/json.hpp>

#include "firelite/firelite.hpp"

namespace firelite::cli {
namespace {

using nlohmann::json;

enum class OutputFormat { Text, Json };

struct CliConfig {
    std::string weights_path;
    OutputFormat format = OutputFormat::Text;
    std::size_t threads = 1;
    std::size_t iterations = 100;
    std::size_t warmup = 10;
};

// Thrown to unwind to run() with a specific exit code.
struct CliFailure : std::runtime_error {
    CliFailure(int code, const std::string& message) : std::runtime_error(message), code(code) {}
    int code;
};

[[noreturn]] void fail_with(int code, const std::string& message) { throw CliFailure(code, message); }

std::string strf(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
std::string strf(const char* fmt, ...) {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof(buf), fmt, args);
    va_end(args);
    return buf;
}

std::string with_commas(std::size_t n) {
    std::string digits = std::to_string(n);
    for (int i = static_cast<int>(digits.size()) - 3; i > 0; i -= 3) digits.insert(static_cast<std::size_t>(i), ",");
    return digits;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        fail_with(kExitWeights, "sha256 failed");
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) hex += strf("%02x", digest[i]);
    return hex;
}

struct LoadedWeights {
    WeightStore store;
    std::string sha;
    std::size_t file_bytes = 0;
};

LoadedWeights read_weights(const CliConfig& cfg) {
    try {
        const auto bytes = read_file_bytes(cfg.weights_path);
        return {parse_store(bytes), sha256_hex(bytes), bytes.size()};
    } catch (const Error& e) {
        fail_with(kExitWeights, "cannot load weights '" + cfg.weights_path + "': " + e.what());
    }
}

ModelGraph graph_for(const WeightStore& store) {
    try {
        return build_firelite(kFireLiteInputSize, class_names_from(store));
    } catch (const Error& e) {
        fail_with(kExitWeights, std::string("weights do not describe a FireLite model: ") + e.what());
    }
}

struct Runnable {
    FoldedModel model;
    std::string sha;
};

// Everything classify/evaluate/bench need: a validated store whose
// preprocessing matches ours, with batch norms folded away.
Runnable load_runnable(const CliConfig& cfg, std::ostream& err) {
    LoadedWeights w = read_weights(cfg);
    const auto prep = w.store.metadata_value(kMetaPreprocessing).value_or("");
    if (prep != kPreprocessingId) {
        fail_with(kExitWeights, "weights expect preprocessing '" + prep + "' but this build implements '" +
                                    std::string(kPreprocessingId) + "'");
    }
    const ModelGraph graph = graph_for(w.store);
    const ValidationReport report = validate_against(w.store, graph);
    std::string problems;
    for (const auto& issue : report.issues) {
        if (issue.kind == IssueKind::Unused)
            err << "warning: " << issue.describe() << "\n";
        else
            problems += "\n  " + issue.describe();
    }
    if (!problems.empty()) fail_with(kExitWeights, "weights do not match the model:" + problems);
    try {
        return {fold_batchnorms(graph, w.store), w.sha};
    } catch (const Error& e) {
        fail_with(kExitWeights, e.what());
    }
}

Tensor load_image(const std::string& path) {
    try {
        return preprocess(read_file_bytes(path));
    } catch (const Error& e) {
        fail_with(kExitInput, "cannot read image '" + path + "': " + e.what());
    }
}

int cmd_classify(const CliConfig& cfg, const std::string& image, std::ostream& out, std::ostream& err) {
    const Runnable r = load_runnable(cfg, err);
    const Tensor input = load_image(image);
    const Prediction p = predict(r.model.graph, r.model.weights, input);
    if (cfg.format == OutputFormat::Json) {
        out << json{{"label", p.label},
                    {"class_index", p.class_index},
                    {"probabilities", p.probabilities},
                    {"model_sha", r.sha}}
                   .dump(2)
            << "\n";
        return kExitOk;
    }
    out << strf("%s (p=%.4f)\n", p.label.c_str(), double(p.probabilities[p.class_index]));
    for (std::size_t c = 0; c < p.probabilities.size(); ++c)
        out << strf("  %-10s %.6f\n", r.model.graph.class_names[c].c_str(), double(p.probabilities[c]));
    return kExitOk;
}

void print_matrix(std::ostream& out, const std::vector<std::string>& labels, const ConfusionMatrix& cm) {
    const auto norm = cm.row_normalized();
    out << "confusion matrix (rows: actual, columns: predicted)\n";
    out << strf("  %-10s %10s %10s\n", "", labels[0].c_str(), labels[1].c_str());
    for (std::size_t a = 0; a < 2; ++a) {
        out << strf("  %-10s %10llu %10llu\n", labels[a].c_str(), static_cast<unsigned long long>(cm.count(a, 0)),
                    static_cast<unsigned long long>(cm.count(a, 1)));
    }
    out << "\nrow-normalized\n";
    out << strf("  %-10s %10s %10s\n", "", labels[0].c_str(), labels[1].c_str());
    for (std::size_t a = 0; a < 2; ++a)
        out << strf("  %-10s %10.4f %10.4f\n", labels[a].c_str(), norm[a][0], norm[a][1]);
}

void print_metrics(std::ostream& out, const std::vector<std::string>& labels, const MetricsReport& m) {
    out << strf("\naccuracy  %.4f\n\n", m.accuracy);
    out << strf("  %-14s %9s %9s %9s %9s\n", "", "precision", "recall", "f1", "support");
    std::uint64_t total = 0;
    for (std::size_t c = 0; c < 2; ++c) {
        const ClassMetrics& k = m.per_class[c];
        total += k.support;
        out << strf("  %-14s %9.4f %9.4f %9.4f %9llu\n", labels[c].c_str(), k.precision, k.recall, k.f1,
                    static_cast<unsigned long long>(k.support));
    }
    out << strf("  %-14s %9.4f %9.4f %9.4f %9llu\n", "macro avg", m.macro.precision, m.macro.recall, m.macro.f1,
                static_cast<unsigned long long>(total));
    out << strf("  %-14s %9.4f %9.4f %9.4f %9llu\n", "weighted avg", m.weighted.precision, m.weighted.recall,
                m.weighted.f1, static_cast<unsigned long long>(total));
}

int cmd_evaluate(const CliConfig& cfg, const std::string& root, std::ostream& out, std::ostream& err) {
    const Runnable r = load_runnable(cfg, err);
    EvaluationResult result;
    try {
        result = evaluate_directory(r.model.graph, r.model.weights, root, cfg.threads);
    } catch (const Error& e) {
        fail_with(e.kind() == ErrorKind::Layout ? kExitLayout : kExitInput, e.what());
    }
    for (const auto& f : result.log) {
        if (!f.predicted) err << "warning: skipped " << f.path.string() << ": " << f.error << "\n";
    }
    const auto& labels = r.model.graph.class_names;
    if (cfg.format == OutputFormat::Json) {
        json files = json::array();
        for (const auto& f : result.log) {
            json entry{{"path", f.path.string()}, {"truth", labels[f.truth]}};
            if (f.predicted) {
                entry["predicted"] = labels[*f.predicted];
                entry["fire_probability"] = f.fire_probability;
            } else {
                entry["predicted"] = nullptr;
                entry["error"] = f.error;
            }
            files.push_back(std::move(entry));
        }
        out << json{{"confusion_matrix", to_json(result.matrix, labels)},
                    {"metrics", to_json(result.metrics, labels)},
                    {"samples", result.matrix.total()},
                    {"warnings", result.warnings},
                    {"files", files},
                    {"model_sha", r.sha}}
                   .dump(2)
            << "\n";
        return kExitOk;
    }
    print_matrix(out, labels, result.matrix);
    print_metrics(out, labels, result.metrics);
    out << strf("\nsamples %llu, skipped %zu\n", static_cast<unsigned long long>(result.matrix.total()),
                result.warnings);
    return kExitOk;
}

// Nearest-rank percentile of an ascending sample.
double percentile(const std::vector<double>& sorted, double p) {
    const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(sorted.size())));
    return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

int cmd_bench(const CliConfig& cfg, const std::string& image, std::ostream& out, std::ostream& err) {
    const Runnable r = load_runnable(cfg, err);
    std::vector<std::uint8_t> bytes;
    try {
        bytes = read_file_bytes(image);
        preprocess(bytes);
    } catch (const Error& e) {
        fail_with(kExitInput, "cannot read image '" + image + "': " + e.what());
    }
    auto once = [&] { return predict(r.model.graph, r.model.weights, preprocess(bytes)); };
    for (std::size_t i = 0; i < cfg.warmup; ++i) once();
    std::vector<double> samples;
    samples.reserve(cfg.iterations);
    for (std::size_t i = 0; i < cfg.iterations; ++i) {
        const auto start = std::chrono::steady_clock::now();
        once();
        samples.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
    }
    std::vector<double> sorted = samples;
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    for (double s : samples) sum += s;
    const double mean = sum / static_cast<double>(samples.size());
    const double p50 = percentile(sorted, 50), p95 = percentile(sorted, 95);
    const double throughput = mean > 0 ? 1000.0 / mean : 0.0;
    const MemoryReport mem = analyze_memory(r.model.graph, r.model.weights);

    if (cfg.format == OutputFormat::Json) {
        out << json{{"iterations", cfg.iterations},
                    {"warmup", cfg.warmup},
                    {"samples_ms", samples},
                    {"latency_ms", {{"mean", mean}, {"p50", p50}, {"p95", p95}, {"min", sorted.front()},
                                    {"max", sorted.back()}}},
                    {"throughput_ips", throughput},
                    {"memory",
                     {{"weight_bytes", mem.weight_bytes},
                      {"peak_activation_bytes", mem.peak_activation_bytes},
                      {"peak_layer", mem.peak_layer},
                      {"total_bytes", mem.total_bytes()}}},
                    {"model_sha", r.sha}}
                   .dump(2)
            << "\n";
        return kExitOk;
    }
    out << strf("iterations  %zu (warmup %zu), preprocess + forward, batch-norm folded\n", cfg.iterations, cfg.warmup);
    out << strf("latency ms  mean %.3f  p50 %.3f  p95 %.3f  min %.3f  max %.3f\n", mean, p50, p95, sorted.front(),
                sorted.back());
    out << strf("throughput  %.2f img/s\n", throughput);
    out << "memory      weights " << with_commas(mem.weight_bytes) << " B + peak activation "
        << with_commas(mem.peak_activation_bytes) << " B (" << mem.peak_layer << ") = " << with_commas(mem.total_bytes())
        << " B\n";
    return kExitOk;
}

int cmd_inspect(const CliConfig& cfg, std::ostream& out, std::ostream& err) {
    const LoadedWeights w = read_weights(cfg);
    const ModelGraph graph = graph_for(w.store);
    const ParamCounts counts = count_params(graph);
    const ValidationReport report = validate_against(w.store, graph);
    const auto prep = w.store.metadata_value(kMetaPreprocessing).value_or("");
    const bool prep_ok = prep == kPreprocessingId;
    const bool usable = prep_ok && report.count(IssueKind::Missing) == 0 && report.count(IssueKind::ShapeMismatch) == 0;

    std::size_t stored = 0;
    for (const auto& e : w.store.entries()) stored += e.tensor.size();

    if (cfg.format == OutputFormat::Json) {
        json tensors = json::array();
        for (const auto& e : w.store.entries())
            tensors.push_back({{"name", e.name}, {"shape", e.tensor.shape()}, {"bytes", e.tensor.byte_size()}});
        json issues = json::array();
        for (const auto& i : report.issues) {
            const char* kind = i.kind == IssueKind::Missing ? "missing"
                               : i.kind == IssueKind::Unused ? "unused"
                                                             : "shape_mismatch";
            issues.push_back({{"kind", kind}, {"tensor", i.tensor}, {"layer", i.layer}, {"message", i.describe()}});
        }
        out << json{{"path", cfg.weights_path},
                    {"file_bytes", w.file_bytes},
                    {"model_sha", w.sha},
                    {"metadata", w.store.metadata()},
                    {"tensors", tensors},
                    {"stored_parameters", stored},
                    {"parameters",
                     {{"total", counts.total}, {"trainable", counts.trainable}, {"non_trainable", counts.non_trainable}}},
                    {"validation", {{"ok", report.ok()}, {"issues", issues}}},
                    {"preprocessing_ok", prep_ok}}
                   .dump(2)
            << "\n";
    } else {
        out << "file        " << cfg.weights_path << " (" << with_commas(w.file_bytes) << " bytes, FLW1 v"
            << kFlwVersion << ", checksum ok)\n";
        out << "sha256      " << w.sha << "\n\nmetadata\n";
        for (const auto& [k, v] : w.store.metadata()) out << "  " << k << " = " << v << "\n";
        out << "\ntensors (" << w.store.entries().size() << ")\n";
        for (const auto& e : w.store.entries()) {
            out << strf("  %-28s %-16s %12s B\n", e.name.c_str(), shape_to_string(e.tensor.shape()).c_str(),
                        with_commas(e.tensor.byte_size()).c_str());
        }
        out << "\nstored parameters: " << with_commas(stored) << "\n";
        out << "total parameters: " << with_commas(counts.total) << "\n";
        out << "trainable parameters: " << with_commas(counts.trainable) << "\n";
        out << "non-trainable parameters: " << with_commas(counts.non_trainable) << "\n";
        out << "\nvalidation: ";
        if (report.ok()) {
            out << "ok\n";
        } else {
            out << report.issues.size() << " issue(s)\n";
            for (const auto& i : report.issues) out << "  " << i.describe() << "\n";
        }
    }
    if (!prep_ok) err << "error: preprocessing '" << prep << "' is not '" << kPreprocessingId << "'\n";
    if (report.count(IssueKind::Unused) > 0)
        err << "warning: " << report.count(IssueKind::Unused) << " tensor(s) not used by the model\n";
    return usable ? kExitOk : kExitWeights;
}

std::size_t parse_threads(const std::string& text) {
    if (text == "auto") return std::max(1u, std::thread::hardware_concurrency());
    std::size_t pos = 0;
    unsigned long n = 0;
    try {
        n = std::stoul(text, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != text.size() || n == 0 || text.empty() || text[0] == '-')
        fail_with(kExitUsage, "--threads: expected a positive integer or 'auto', got '" + text + "'");
    return n;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"FireLite fire / non-fire image classifier", "firelite"};
    app.require_subcommand(1);
    app.fallthrough();

    CliConfig cfg;
    std::string format = "text";
    std::string threads = "1";
    std::string input;
    app.add_option("--weights", cfg.weights_path, "FLW1 weight file (default: $FIRELITE_WEIGHTS)");
    app.add_option("--format", format, "Output format")->check(CLI::IsMember({"text", "json"}));
    app.add_option("--threads", threads, "Worker threads for evaluate: N or auto");
    app.add_option("--iterations", cfg.iterations, "Timed bench iterations")->check(CLI::PositiveNumber);
    app.add_option("--warmup", cfg.warmup, "Untimed bench iterations")->check(CLI::NonNegativeNumber);

    auto* classify = app.add_subcommand("classify", "Classify one image");
    classify->add_option("image", input, "PNG or JPEG file")->required();
    auto* evaluate = app.add_subcommand("evaluate", "Score a fire/ nonfire/ directory tree");
    evaluate->add_option("dataset", input, "Directory containing one subdirectory per class")->required();
    auto* bench = app.add_subcommand("bench", "Time preprocess + inference on one image");
    bench->add_option("image", input, "PNG or JPEG file")->required();
    auto* inspect = app.add_subcommand("inspect", "Summarize and validate a weight file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        cfg.format = format == "json" ? OutputFormat::Json : OutputFormat::Text;
        cfg.threads = parse_threads(threads);
        if (cfg.weights_path.empty()) {
            if (const char* env = std::getenv("FIRELITE_WEIGHTS")) cfg.weights_path = env;
        }
        if (cfg.weights_path.empty()) fail_with(kExitUsage, "no weights given: pass --weights or set FIRELITE_WEIGHTS");

        if (classify->parsed()) return cmd_classify(cfg, input, out, err);
        if (evaluate->parsed()) return cmd_evaluate(cfg, input, out, err);
        if (bench->parsed()) return cmd_bench(cfg, input, out, err);
        if (inspect->parsed()) return cmd_inspect(cfg, out, err);
        fail_with(kExitUsage, "no subcommand");
    } catch (const CliFailure& f) {
        err << "firelite: " << f.what() << "\n";
        return f.code;
    } catch (const Error& e) {
        // Anything not attributed above happened while processing the input.
        err << "firelite: " << e.what() << "\n";
        return kExitInput;
    }
}

}  // namespace firelite::cli
