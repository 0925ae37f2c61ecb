#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "firelite/evaluate.hpp"
#include "firelite/metrics.hpp"
#include "test_helpers.hpp"

namespace firelite {
namespace {

using testing::error_kind_of;

// Reference test-set outcome: 118 fire and 123 non-fire correct, 2 non-fire
// images called fire.
ConfusionMatrix reference_matrix() { return ConfusionMatrix::from_counts(118, 0, 2, 123); }

TEST(RecordTest, SingleCells) {
    EXPECT_EQ(record({}, 0, 0).tp(), 1u);
    EXPECT_EQ(record({}, 1, 0).fp(), 1u);
    EXPECT_EQ(record({}, 0, 1).fn(), 1u);
    EXPECT_EQ(record({}, 1, 1).tn(), 1u);
    const ConfusionMatrix cm = record({}, 1, 0);
    EXPECT_EQ(cm.total(), 1u);
}

TEST(RecordTest, OutOfRangeIsDomainError) {
    ConfusionMatrix cm;
    EXPECT_EQ(error_kind_of([&] { cm.record(2, 0); }), ErrorKind::Domain);
    EXPECT_EQ(error_kind_of([&] { cm.record(0, 7); }), ErrorKind::Domain);
    EXPECT_EQ(cm.total(), 0u);
}

TEST(RecordTest, ReplayOf243Outcomes) {
    std::vector<std::pair<std::size_t, std::size_t>> outcomes;
    outcomes.insert(outcomes.end(), 118, {0, 0});
    outcomes.insert(outcomes.end(), 123, {1, 1});
    outcomes.insert(outcomes.end(), 2, {1, 0});
    std::shuffle(outcomes.begin(), outcomes.end(), std::mt19937(9));
    ASSERT_EQ(outcomes.size(), 243u);
    ConfusionMatrix cm;
    for (auto [a, p] : outcomes) cm = record(cm, a, p);
    EXPECT_EQ(cm, reference_matrix());
    EXPECT_EQ(cm.tp(), 118u);
    EXPECT_EQ(cm.tn(), 123u);
    EXPECT_EQ(cm.fp(), 2u);
    EXPECT_EQ(cm.fn(), 0u);
}

TEST(MetricsTest, ReferenceMatrix) {
    const MetricsReport r = compute_metrics(reference_matrix());
    EXPECT_NEAR(r.accuracy, 241.0 / 243.0, 1e-12);
    EXPECT_NEAR(r.accuracy, 0.99177, 5e-5);
    EXPECT_NEAR(r.weighted.precision, 0.99189, 5e-5);
    EXPECT_NEAR(r.weighted.recall, 0.9918, 1e-4);
    EXPECT_NEAR(r.weighted.f1, 0.9918, 1e-4);
    // Rounded to two decimals in percent these read 99.18 / 99.19 / 99.18 / 99.18.
    EXPECT_NEAR(r.accuracy * 100, 99.18, 0.005);
    EXPECT_NEAR(r.weighted.precision * 100, 99.19, 0.005);
    EXPECT_NEAR(r.weighted.recall * 100, 99.18, 0.005);
    EXPECT_NEAR(r.weighted.f1 * 100, 99.18, 0.005);

    EXPECT_EQ(r.per_class[0].support, 118u);
    EXPECT_EQ(r.per_class[1].support, 125u);
    EXPECT_NEAR(r.per_class[0].precision, 118.0 / 120.0, 1e-12);
    EXPECT_DOUBLE_EQ(r.per_class[0].recall, 1.0);
    EXPECT_DOUBLE_EQ(r.per_class[1].precision, 1.0);
    EXPECT_NEAR(r.per_class[1].recall, 123.0 / 125.0, 1e-12);
}

TEST(MetricsTest, EmptyMatrixIsDomainError) {
    EXPECT_EQ(error_kind_of([] { compute_metrics({}); }), ErrorKind::Domain);
}

TEST(MetricsTest, ZeroOverZeroIsZero) {
    // Nothing predicted as nonfire and no nonfire samples.
    const MetricsReport r = compute_metrics(ConfusionMatrix::from_counts(5, 0, 0, 0));
    EXPECT_DOUBLE_EQ(r.per_class[1].precision, 0.0);
    EXPECT_DOUBLE_EQ(r.per_class[1].recall, 0.0);
    EXPECT_DOUBLE_EQ(r.per_class[1].f1, 0.0);
    EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
    EXPECT_DOUBLE_EQ(r.weighted.f1, 1.0);
    EXPECT_DOUBLE_EQ(r.macro.f1, 0.5);
}

TEST(MetricsTest, RowNormalized) {
    const auto norm = ConfusionMatrix::from_counts(3, 1, 0, 0).row_normalized();
    EXPECT_DOUBLE_EQ(norm[0][0], 0.75);
    EXPECT_DOUBLE_EQ(norm[0][1], 0.25);
    EXPECT_DOUBLE_EQ(norm[1][0], 0.0);
    EXPECT_DOUBLE_EQ(norm[1][1], 0.0);
}

TEST(MetricsTest, JsonShape) {
    const std::vector<std::string> labels{"fire", "nonfire"};
    const auto j = to_json(compute_metrics(reference_matrix()), labels);
    EXPECT_NEAR(j.at("accuracy").get<double>(), 241.0 / 243.0, 1e-12);
    EXPECT_TRUE(j.contains("weighted"));
    EXPECT_TRUE(j.contains("macro"));
    const auto m = to_json(reference_matrix(), labels);
    EXPECT_EQ(m.dump().find("118") != std::string::npos, true);
}

// Scalar recomputation of every field, written out from the definitions.
void expect_matches_definitions(const ConfusionMatrix& cm) {
    const double tp = cm.tp(), fn = cm.fn(), fp = cm.fp(), tn = cm.tn();
    const double n = tp + fn + fp + tn;
    auto ratio = [](double a, double b) { return b == 0 ? 0.0 : a / b; };
    const double p0 = ratio(tp, tp + fp), r0 = ratio(tp, tp + fn);
    const double p1 = ratio(tn, tn + fn), r1 = ratio(tn, tn + fp);
    const double f0 = ratio(2 * p0 * r0, p0 + r0), f1 = ratio(2 * p1 * r1, p1 + r1);
    const double s0 = tp + fn, s1 = fp + tn;

    const MetricsReport r = compute_metrics(cm);
    constexpr double tol = 1e-12;
    EXPECT_NEAR(r.accuracy, (tp + tn) / n, tol);
    EXPECT_NEAR(r.per_class[0].precision, p0, tol);
    EXPECT_NEAR(r.per_class[0].recall, r0, tol);
    EXPECT_NEAR(r.per_class[0].f1, f0, tol);
    EXPECT_NEAR(r.per_class[1].precision, p1, tol);
    EXPECT_NEAR(r.per_class[1].recall, r1, tol);
    EXPECT_NEAR(r.per_class[1].f1, f1, tol);
    EXPECT_NEAR(r.macro.precision, (p0 + p1) / 2, tol);
    EXPECT_NEAR(r.macro.f1, (f0 + f1) / 2, tol);
    EXPECT_NEAR(r.weighted.precision, (s0 * p0 + s1 * p1) / n, tol);
    EXPECT_NEAR(r.weighted.recall, (s0 * r0 + s1 * r1) / n, tol);
    EXPECT_NEAR(r.weighted.f1, (s0 * f0 + s1 * f1) / n, tol);
    for (double v : {r.accuracy, r.macro.precision, r.macro.recall, r.macro.f1, r.weighted.precision,
                     r.weighted.recall, r.weighted.f1}) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(MetricsProperty, AgreesWithDefinitions) {
    std::mt19937 rng(11);
    std::uniform_int_distribution<int> count(0, 50);
    expect_matches_definitions(reference_matrix());
    for (int trial = 0; trial < 500; ++trial) {
        const auto cm = ConfusionMatrix::from_counts(count(rng), count(rng), count(rng), count(rng));
        if (cm.total() == 0) continue;
        expect_matches_definitions(cm);
    }
}

TEST(MetricsProperty, PerfectPredictionsGiveOne) {
    for (auto [a, b] : {std::pair{1, 0}, std::pair{0, 4}, std::pair{7, 9}}) {
        const MetricsReport r = compute_metrics(ConfusionMatrix::from_counts(a, 0, 0, b));
        EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
        EXPECT_DOUBLE_EQ(r.weighted.precision, 1.0);
        EXPECT_DOUBLE_EQ(r.weighted.recall, 1.0);
        EXPECT_DOUBLE_EQ(r.weighted.f1, 1.0);
        if (a > 0 && b > 0) {
            EXPECT_DOUBLE_EQ(r.macro.f1, 1.0);
        }
    }
}

TEST(MetricsProperty, SwappingLabelsKeepsAccuracy) {
    std::mt19937 rng(12);
    std::uniform_int_distribution<int> count(0, 30);
    for (int trial = 0; trial < 200; ++trial) {
        const int tp = count(rng), fn = count(rng), fp = count(rng), tn = count(rng);
        if (tp + fn + fp + tn == 0) continue;
        const auto a = compute_metrics(ConfusionMatrix::from_counts(tp, fn, fp, tn));
        const auto b = compute_metrics(ConfusionMatrix::from_counts(tn, fp, fn, tp));
        EXPECT_DOUBLE_EQ(a.accuracy, b.accuracy);
        EXPECT_NEAR(a.weighted.f1, b.weighted.f1, 1e-12);
    }
}

TEST(MetricsProperty, MergeIsAddition) {
    auto a = ConfusionMatrix::from_counts(1, 2, 3, 4);
    a += ConfusionMatrix::from_counts(10, 20, 30, 40);
    EXPECT_EQ(a, ConfusionMatrix::from_counts(11, 22, 33, 44));
}

// Directory evaluation runs the full network, so one graph and a store biased
// towards a chosen class are shared by all cases.
class EvaluateTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        graph_ = new ModelGraph(build_firelite(224, {"fire", "nonfire"}));
        store_ = new WeightStore(testing::random_store(*graph_, 77));
    }
    static void TearDownTestSuite() {
        delete store_;
        delete graph_;
    }

    // Zeroed output kernel: the bias alone decides the class.
    static WeightStore biased_store(std::size_t winner) {
        WeightStore s = *store_;
        const auto& k = s.get("head_output.kernel");
        Tensor zero = Tensor::filled(k.shape(), 0.0f);
        Tensor bias = winner == 0 ? Tensor::from({2}, {5.0f, -5.0f}) : Tensor::from({2}, {-5.0f, 5.0f});
        WeightStore out;
        for (const auto& [key, value] : s.metadata()) out.set_metadata(key, value);
        for (const auto& e : s.entries()) {
            if (e.name == "head_output.kernel")
                out.add(e.name, zero);
            else if (e.name == "head_output.bias")
                out.add(e.name, bias);
            else
                out.add(e.name, e.tensor);
        }
        return out;
    }

    static void make_layout(const std::filesystem::path& root) {
        std::filesystem::create_directories(root / "fire");
        std::filesystem::create_directories(root / "nonfire");
    }

    static inline ModelGraph* graph_ = nullptr;
    static inline WeightStore* store_ = nullptr;
};

TEST_F(EvaluateTest, SingleFireImage) {
    testing::TempDir dir("eval-one");
    make_layout(dir.path());
    const auto img = testing::solid_image(40, 30, 250, 90, 10);
    testing::write_bytes(dir.path() / "fire" / "a.png", testing::encode_png(40, 30, 3, img.pixels));
    const auto result = evaluate_directory(*graph_, biased_store(0), dir.path());
    EXPECT_EQ(result.matrix.tp(), 1u);
    EXPECT_DOUBLE_EQ(result.metrics.accuracy, 1.0);
    ASSERT_EQ(result.log.size(), 1u);
    EXPECT_EQ(result.log[0].predicted, 0u);
    EXPECT_GT(result.log[0].fire_probability, 0.99f);
    EXPECT_EQ(result.warnings, 0u);
}

TEST_F(EvaluateTest, EmptyDirectoriesAreDomainError) {
    testing::TempDir dir("eval-empty");
    make_layout(dir.path());
    EXPECT_EQ(error_kind_of([&] { evaluate_directory(*graph_, *store_, dir.path()); }), ErrorKind::Domain);
}

TEST_F(EvaluateTest, MissingSubdirectoryIsLayoutError) {
    testing::TempDir dir("eval-missing");
    std::filesystem::create_directories(dir.path() / "fire");
    EXPECT_EQ(error_kind_of([&] { evaluate_directory(*graph_, *store_, dir.path()); }), ErrorKind::Layout);
    EXPECT_EQ(error_kind_of([&] { evaluate_directory(*graph_, *store_, dir.path() / "nope"); }), ErrorKind::Layout);
}

TEST_F(EvaluateTest, UndecodableFileIsSkippedWithWarning) {
    testing::TempDir dir("eval-bad");
    make_layout(dir.path());
    const auto img = testing::solid_image(8, 8, 10, 200, 30);
    testing::write_bytes(dir.path() / "nonfire" / "good.png", testing::encode_png(8, 8, 3, img.pixels));
    testing::write_bytes(dir.path() / "nonfire" / "bad.jpg", {0xFF, 0xD8, 0xFF, 0x00, 0x01});
    testing::write_bytes(dir.path() / "nonfire" / "notes.txt", {'h', 'i'});
    const auto result = evaluate_directory(*graph_, biased_store(1), dir.path());
    EXPECT_EQ(result.warnings, 1u);
    EXPECT_EQ(result.matrix.total(), 1u);
    EXPECT_EQ(result.matrix.tn(), 1u);
    ASSERT_EQ(result.log.size(), 2u);
    EXPECT_EQ(result.log[0].path.filename(), "bad.jpg");
    EXPECT_FALSE(result.log[0].predicted.has_value());
    EXPECT_FALSE(result.log[0].error.empty());
}

TEST_F(EvaluateTest, ThreadCountDoesNotChangeResult) {
    testing::TempDir dir("eval-threads");
    make_layout(dir.path());
    std::mt19937 rng(13);
    for (int i = 0; i < 5; ++i) {
        for (const char* cls : {"fire", "nonfire"}) {
            const auto img = testing::random_image(rng, 24 + i, 20);
            testing::write_bytes(dir.path() / cls / ("img" + std::to_string(i) + ".png"),
                                 testing::encode_png(img.width, img.height, 3, img.pixels));
        }
    }
    const auto one = evaluate_directory(*graph_, *store_, dir.path(), 1);
    const auto three = evaluate_directory(*graph_, *store_, dir.path(), 3);
    EXPECT_EQ(one.matrix, three.matrix);
    EXPECT_EQ(one.matrix.total(), 10u);
    ASSERT_EQ(one.log.size(), three.log.size());
    for (std::size_t i = 0; i < one.log.size(); ++i) {
        EXPECT_EQ(one.log[i].path, three.log[i].path);
        EXPECT_EQ(one.log[i].predicted, three.log[i].predicted);
        EXPECT_EQ(one.log[i].fire_probability, three.log[i].fire_probability);
    }
    EXPECT_TRUE(std::is_sorted(one.log.begin(), one.log.end(),
                               [](const auto& a, const auto& b) { return a.path < b.path; }));
}

TEST(ListImagesTest, FiltersAndSorts) {
    testing::TempDir dir("list");
    for (const char* name : {"b.PNG", "a.jpg", "c.Jpeg", "d.gif", "e"}) testing::write_bytes(dir.path() / name, {0});
    const auto files = list_images(dir.path());
    ASSERT_EQ(files.size(), 3u);
    EXPECT_EQ(files[0].filename(), "a.jpg");
    EXPECT_EQ(files[1].filename(), "b.PNG");
    EXPECT_EQ(files[2].filename(), "c.Jpeg");
}

}  // namespace
}  // namespace firelite
