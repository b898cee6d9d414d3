#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "strobevib/controller.hpp"
#include "strobevib/scene.hpp"

namespace strobevib {

/// Mean relative detection error in percent:
///   e = (1/N) sum |f_gt - f_d^i| / f_gt * 100
double detection_error(double f_gt, std::span<const double> detections);

/// MA = (1 - e/100) * 100
double measurement_accuracy(double e_percent);

struct RunStats {
    std::string modality;
    std::vector<double> detected_freqs;  // per run, in scene source order
    std::vector<double> detected_means;  // per scene source
    double detection_error_mean = 0.0;
    double detection_error_std = 0.0;  // sample standard deviation across runs
    double measurement_accuracy = 100.0;
    double consumed_time_mean = 0.0;
    int n_runs = 0;
    bool reference = false;  // constant row, not produced by this simulator
};

/// Detected frequency for each scene source, NaN when the report has no
/// detection for it. ROI-bearing detections are matched by image position,
/// the others by frequency.
std::vector<double> match_detections(const Scene& scene, const DetectionReport& report);

/// Error of one run averaged over the scene's moving sources. A source with
/// no detection counts as 100%.
double run_detection_error(const Scene& scene, const DetectionReport& report);

RunStats summarize_runs(const std::string& modality, const Scene& scene, std::span<const DetectionReport> reports);

nlohmann::ordered_json to_json(const RunStats& stats);
/// Throws ConfigError naming the missing or mistyped field.
RunStats run_stats_from_json(const nlohmann::json& j);

std::vector<RunStats> load_reference_rows(const std::filesystem::path& path);
std::filesystem::path default_reference_rows_path();

struct ComparisonTable {
    std::vector<RunStats> rows;

    std::string to_csv() const;
    std::string to_text() const;
    nlohmann::ordered_json to_json() const;
};

/// Simulated modalities first (proposed, rf_only, strobe_linear, strobe_crt,
/// then any others by name), followed by the reference rows.
ComparisonTable build_comparison_table(const std::map<std::string, RunStats>& runs,
                                       const std::vector<RunStats>& reference_rows);

}  // namespace strobevib
