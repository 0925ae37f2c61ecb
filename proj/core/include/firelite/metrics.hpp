#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace firelite {

/// 2x2 counts indexed [actual][predicted]; class 0 is the positive class (fire).
class ConfusionMatrix {
public:
    static constexpr std::size_t kClasses = 2;

    /// Increments one cell; throws a domain error for an index outside {0, 1}.
    void record(std::size_t actual, std::size_t predicted);

    std::uint64_t count(std::size_t actual, std::size_t predicted) const;
    std::uint64_t tp() const noexcept { return counts_[0][0]; }
    std::uint64_t fn() const noexcept { return counts_[0][1]; }
    std::uint64_t fp() const noexcept { return counts_[1][0]; }
    std::uint64_t tn() const noexcept { return counts_[1][1]; }
    std::uint64_t total() const noexcept { return tp() + fn() + fp() + tn(); }

    /// Samples whose ground truth is `cls`.
    std::uint64_t support(std::size_t cls) const;
    /// Samples predicted as `cls`.
    std::uint64_t predicted(std::size_t cls) const;

    /// Each row divided by its sum; an empty row stays all zeros.
    std::array<std::array<double, kClasses>, kClasses> row_normalized() const;

    ConfusionMatrix& operator+=(const ConfusionMatrix& other) noexcept;
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

    static ConfusionMatrix from_counts(std::uint64_t tp, std::uint64_t fn, std::uint64_t fp, std::uint64_t tn);

private:
    std::array<std::array<std::uint64_t, kClasses>, kClasses> counts_{};
};

/// Functional form of ConfusionMatrix::record.
ConfusionMatrix record(ConfusionMatrix cm, std::size_t actual, std::size_t predicted);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t support = 0;
};

struct AggregateMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct MetricsReport {
    double accuracy = 0.0;
    std::array<ClassMetrics, ConfusionMatrix::kClasses> per_class{};
    AggregateMetrics macro;
    AggregateMetrics weighted;  // support-weighted mean of per_class
};

/// Accuracy plus per-class, macro and support-weighted precision, recall
/// and F1. Any 0/0 ratio is 0. Throws a domain error on an empty matrix.
MetricsReport compute_metrics(const ConfusionMatrix& cm);

nlohmann::json to_json(const ConfusionMatrix& cm, const std::vector<std::string>& labels);
nlohmann::json to_json(const MetricsReport& report, const std::vector<std::string>& labels);

}  // namespace firelite
