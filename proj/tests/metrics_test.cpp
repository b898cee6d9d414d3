#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "strobevib/error.hpp"
#include "strobevib/metrics.hpp"

using namespace strobevib;

namespace {

Scene two_speakers() {
    Scene scene;
    for (int i = 0; i < 2; ++i) {
        SourceSpec s;
        s.id = i ? "right" : "left";
        s.freq_hz = i ? 141.0 : 113.0;
        s.center_px = {80.0 + 160.0 * i, 120.0};
        scene.sources.push_back(s);
    }
    return scene;
}

SourceDetection at(double f, Vec2 c, int roi) {
    SourceDetection d;
    d.detected_freq = f;
    d.roi_centroid = c;
    d.roi_id = roi;
    return d;
}

RunStats row(const std::string& modality, double err) {
    RunStats r;
    r.modality = modality;
    r.detection_error_mean = err;
    r.measurement_accuracy = measurement_accuracy(err);
    r.n_runs = 3;
    r.detected_means = {113.0};
    return r;
}

}  // namespace

TEST(DetectionError, WorkedExamples) {
    const std::vector<double> one{112.95};
    EXPECT_NEAR(detection_error(113.0, one), 0.0442, 1e-4);
    const std::vector<double> two{99.0, 101.0};
    EXPECT_NEAR(detection_error(100.0, two), 1.0, 1e-12);
}

TEST(DetectionError, ExactDetectionIsPerfectAccuracy) {
    for (double f : {0.5, 40.0, 113.0, 2400.0}) {
        const std::vector<double> d{f};
        EXPECT_EQ(measurement_accuracy(detection_error(f, d)), 100.0);
    }
}

TEST(DetectionError, ScaleInvariant) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    for (int i = 0; i < 100; ++i) {
        const double f = 100.0 * u(rng);
        const std::vector<double> d{f * u(rng), f * u(rng)};
        const double c = 1.0 + 10.0 * u(rng);
        const std::vector<double> scaled{c * d[0], c * d[1]};
        ASSERT_NEAR(detection_error(c * f, scaled), detection_error(f, d), 1e-9);
    }
}

TEST(DetectionError, RejectsBadInputs) {
    const std::vector<double> d{1.0};
    EXPECT_THROW(detection_error(0.0, d), ConfigError);
    EXPECT_THROW(detection_error(10.0, {}), ConfigError);
}

TEST(MeasurementAccuracy, WorkedExamples) {
    EXPECT_NEAR(measurement_accuracy(4.5), 95.5, 1e-12);
    EXPECT_NEAR(measurement_accuracy(0.13), 99.87, 1e-12);
    EXPECT_THROW(measurement_accuracy(-1.0), ConfigError);
    EXPECT_THROW(measurement_accuracy(101.0), ConfigError);
}

TEST(Matching, UsesImagePositionForRoiDetections) {
    const auto scene = two_speakers();
    DetectionReport r;
    // Deliberately listed right first, with frequencies that would mislead a
    // frequency-only match.
    r.sources = {at(115.0, {238, 121}, 2), at(139.0, {82, 119}, 1)};
    const auto m = match_detections(scene, r);
    ASSERT_EQ(m.size(), 2u);
    EXPECT_EQ(m[0], 139.0);
    EXPECT_EQ(m[1], 115.0);
}

TEST(Matching, FallsBackToFrequencyAndFlagsMisses) {
    const auto scene = two_speakers();
    DetectionReport r;
    r.sources = {at(140.5, {}, 0)};
    const auto m = match_detections(scene, r);
    EXPECT_TRUE(std::isnan(m[0]));
    EXPECT_EQ(m[1], 140.5);
    // The missing left source counts as a full miss.
    EXPECT_NEAR(run_detection_error(scene, r), 0.5 * (100.0 + 0.5 / 141.0 * 100.0), 1e-9);
}

TEST(Summary, MeanAndSampleStdAcrossRuns) {
    const auto scene = two_speakers();
    std::vector<DetectionReport> reports(3);
    const double lefts[] = {113.0, 112.0, 114.0};
    for (int i = 0; i < 3; ++i) {
        reports[i].sources = {at(lefts[i], {80, 120}, 1), at(141.0, {240, 120}, 2)};
        reports[i].timing.total_consumed_s = 10.0 + i;
    }
    const auto s = summarize_runs("proposed", scene, reports);
    const double e1 = 0.5 * 100.0 / 113.0;
    EXPECT_EQ(s.n_runs, 3);
    EXPECT_NEAR(s.detection_error_mean, 2.0 * e1 / 3.0, 1e-12);
    // Errors {0, e1, e1}: sample variance e1^2 / 3.
    EXPECT_NEAR(s.detection_error_std, e1 / std::sqrt(3.0), 1e-12);
    EXPECT_NEAR(s.measurement_accuracy, 100.0 - s.detection_error_mean, 1e-12);
    EXPECT_NEAR(s.consumed_time_mean, 11.0, 1e-12);
    ASSERT_EQ(s.detected_means.size(), 2u);
    EXPECT_NEAR(s.detected_means[0], 113.0, 1e-12);
    EXPECT_NEAR(s.detected_means[1], 141.0, 1e-12);
}

TEST(Summary, JsonRoundTripKeepsNaN) {
    auto s = row("rf_only", 0.25);
    s.detected_means = {113.0, std::numeric_limits<double>::quiet_NaN()};
    s.detected_freqs = {113.0, std::numeric_limits<double>::quiet_NaN()};
    s.consumed_time_mean = 1.0;
    const auto back = run_stats_from_json(nlohmann::json::parse(to_json(s).dump()));
    EXPECT_EQ(back.modality, "rf_only");
    EXPECT_DOUBLE_EQ(back.detection_error_mean, 0.25);
    EXPECT_EQ(back.n_runs, 3);
    ASSERT_EQ(back.detected_means.size(), 2u);
    EXPECT_TRUE(std::isnan(back.detected_means[1]));
    EXPECT_EQ(to_json(back).dump(), to_json(s).dump());
}

TEST(Summary, MissingFieldIsNamed) {
    auto j = nlohmann::json::parse(to_json(row("proposed", 1.0)).dump());
    j.erase("n_runs");
    try {
        run_stats_from_json(j);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.field(), "n_runs");
    }
}

TEST(ComparisonTable, CanonicalOrderWithReferenceRowsLast) {
    const auto refs = load_reference_rows(default_reference_rows_path());
    ASSERT_EQ(refs.size(), 2u);
    for (const auto& r : refs) EXPECT_TRUE(r.reference);
    const std::map<std::string, RunStats> runs{{"strobe_crt", row("strobe_crt", 3.0)},
                                               {"custom", row("custom", 9.0)},
                                               {"rf_only", row("rf_only", 0.2)},
                                               {"proposed", row("proposed", 0.01)},
                                               {"strobe_linear", row("strobe_linear", 1.0)}};
    const auto table = build_comparison_table(runs, refs);
    ASSERT_EQ(table.rows.size(), 7u);
    const std::vector<std::string> order{"proposed", "rf_only", "strobe_linear", "strobe_crt", "custom"};
    for (std::size_t i = 0; i < order.size(); ++i) EXPECT_EQ(table.rows[i].modality, order[i]);
    EXPECT_TRUE(table.rows[5].reference);
    EXPECT_TRUE(table.rows[6].reference);
}

TEST(ComparisonTable, ReferenceOnlyAndDeterministic) {
    const auto refs = load_reference_rows(default_reference_rows_path());
    const auto only = build_comparison_table({}, refs);
    EXPECT_EQ(only.rows.size(), refs.size());
    const auto csv = only.to_csv();
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "modality,detected_hz,error_mean_pct,error_std_pct,accuracy_pct,consumed_time_s,n_runs,status");
    EXPECT_NE(csv.find(",\"reference, not reproduced\"\n"), std::string::npos) << csv;

    const std::map<std::string, RunStats> runs{{"proposed", row("proposed", 0.01)}};
    const auto a = build_comparison_table(runs, refs);
    const auto b = build_comparison_table(runs, refs);
    EXPECT_EQ(a.to_csv(), b.to_csv());
    EXPECT_EQ(a.to_text(), b.to_text());
    EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
    EXPECT_EQ(a.to_json().at("rows").size(), 3u);
}

TEST(ComparisonTable, MissingReferenceFileIsAnIoError) {
    EXPECT_THROW(load_reference_rows("/nonexistent/reference_rows.json"), IoError);
}
