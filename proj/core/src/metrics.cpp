#include "firelite/metrics.hpp"

#include "firelite/errors.hpp"

namespace firelite {
namespace {

void check_index(std::size_t i, const char* what) {
    if (i >= ConfusionMatrix::kClasses) {
        fail(ErrorKind::Domain, std::string(what) + " class index " + std::to_string(i) + " is not 0 or 1");
    }
}

double ratio(std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

nlohmann::json aggregate_json(const AggregateMetrics& m) {
    return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

}  // namespace

void ConfusionMatrix::record(std::size_t actual, std::size_t predicted) {
    check_index(actual, "actual");
    check_index(predicted, "predicted");
    ++counts_[actual][predicted];
}

std::uint64_t ConfusionMatrix::count(std::size_t actual, std::size_t predicted) const {
    check_index(actual, "actual");
    check_index(predicted, "predicted");
    return counts_[actual][predicted];
}

std::uint64_t ConfusionMatrix::support(std::size_t cls) const {
    check_index(cls, "support");
    return counts_[cls][0] + counts_[cls][1];
}

std::uint64_t ConfusionMatrix::predicted(std::size_t cls) const {
    check_index(cls, "predicted");
    return counts_[0][cls] + counts_[1][cls];
}

std::array<std::array<double, ConfusionMatrix::kClasses>, ConfusionMatrix::kClasses>
ConfusionMatrix::row_normalized() const {
    std::array<std::array<double, kClasses>, kClasses> out{};
    for (std::size_t a = 0; a < kClasses; ++a) {
        const std::uint64_t row = support(a);
        for (std::size_t p = 0; p < kClasses; ++p) out[a][p] = ratio(counts_[a][p], row);
    }
    return out;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) noexcept {
    for (std::size_t a = 0; a < kClasses; ++a) {
        for (std::size_t p = 0; p < kClasses; ++p) counts_[a][p] += other.counts_[a][p];
    }
    return *this;
}

ConfusionMatrix ConfusionMatrix::from_counts(std::uint64_t tp, std::uint64_t fn, std::uint64_t fp, std::uint64_t tn) {
    ConfusionMatrix cm;
    cm.counts_ = {{{tp, fn}, {fp, tn}}};
    return cm;
}

ConfusionMatrix record(ConfusionMatrix cm, std::size_t actual, std::size_t predicted) {
    cm.record(actual, predicted);
    return cm;
}

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
    const std::uint64_t total = cm.total();
    if (total == 0) fail(ErrorKind::Domain, "cannot compute metrics on an empty confusion matrix (no samples)");

    MetricsReport r;
    r.accuracy = ratio(cm.tp() + cm.tn(), total);
    for (std::size_t c = 0; c < ConfusionMatrix::kClasses; ++c) {
        ClassMetrics& m = r.per_class[c];
        const std::uint64_t correct = cm.count(c, c);
        m.support = cm.support(c);
        m.precision = ratio(correct, cm.predicted(c));
        m.recall = ratio(correct, m.support);
        const double denom = m.precision + m.recall;
        m.f1 = denom == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / denom;

        const double n = static_cast<double>(ConfusionMatrix::kClasses);
        r.macro.precision += m.precision / n;
        r.macro.recall += m.recall / n;
        r.macro.f1 += m.f1 / n;

        const double w = ratio(m.support, total);
        r.weighted.precision += w * m.precision;
        r.weighted.recall += w * m.recall;
        r.weighted.f1 += w * m.f1;
    }
    return r;
}

nlohmann::json to_json(const ConfusionMatrix& cm, const std::vector<std::string>& labels) {
    nlohmann::json counts = nlohmann::json::array();
    nlohmann::json normalized = nlohmann::json::array();
    const auto norm = cm.row_normalized();
    for (std::size_t a = 0; a < ConfusionMatrix::kClasses; ++a) {
        counts.push_back({cm.count(a, 0), cm.count(a, 1)});
        normalized.push_back({norm[a][0], norm[a][1]});
    }
    return {{"labels", labels},
            {"counts", counts},
            {"normalized", normalized},
            {"tp", cm.tp()},
            {"fn", cm.fn()},
            {"fp", cm.fp()},
            {"tn", cm.tn()},
            {"total", cm.total()}};
}

nlohmann::json to_json(const MetricsReport& report, const std::vector<std::string>& labels) {
    nlohmann::json per_class = nlohmann::json::array();
    for (std::size_t c = 0; c < ConfusionMatrix::kClasses; ++c) {
        const ClassMetrics& m = report.per_class[c];
        per_class.push_back({{"label", c < labels.size() ? labels[c] : std::to_string(c)},
                             {"precision", m.precision},
                             {"recall", m.recall},
                             {"f1", m.f1},
                             {"support", m.support}});
    }
    return {{"accuracy", report.accuracy},
            {"per_class", per_class},
            {"macro", aggregate_json(report.macro)},
            {"weighted", aggregate_json(report.weighted)}};
}

}  // namespace firelite
