#include "strobevib/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "strobevib/error.hpp"

namespace strobevib {

double detection_error(double f_gt, std::span<const double> detections) {
    if (!(f_gt > 0.0)) throw ConfigError("ground truth must be > 0", "f_gt");
    if (detections.empty()) throw ConfigError("no detections", "detections");
    double sum = 0.0;
    for (double f : detections) sum += std::abs(f_gt - f) / f_gt;
    return sum / static_cast<double>(detections.size()) * 100.0;
}

double measurement_accuracy(double e_percent) {
    if (!(e_percent >= 0.0 && e_percent <= 100.0)) throw ConfigError("must lie in [0, 100]", "e");
    return (1.0 - e_percent / 100.0) * 100.0;
}

std::vector<double> match_detections(const Scene& scene, const DetectionReport& report) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> out(scene.sources.size(), nan);
    // Closest (source, detection) pairs first, so one source cannot take a
    // detection that sits much nearer another.
    struct Pair {
        double d;
        std::size_t src, det;
    };
    std::vector<Pair> pairs;
    for (std::size_t i = 0; i < scene.sources.size(); ++i) {
        const auto& src = scene.sources[i];
        for (std::size_t j = 0; j < report.sources.size(); ++j) {
            const auto& det = report.sources[j];
            const double d = det.roi_id > 0 ? std::hypot(det.roi_centroid.x - src.center_px.x,
                                                         det.roi_centroid.y - src.center_px.y)
                                            : std::abs(det.detected_freq - src.freq_hz);
            pairs.push_back({d, i, j});
        }
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.d < b.d; });
    std::vector<bool> src_used(scene.sources.size(), false), det_used(report.sources.size(), false);
    for (const auto& p : pairs) {
        if (src_used[p.src] || det_used[p.det]) continue;
        src_used[p.src] = det_used[p.det] = true;
        out[p.src] = report.sources[p.det].detected_freq;
    }
    return out;
}

double run_detection_error(const Scene& scene, const DetectionReport& report) {
    const auto matched = match_detections(scene, report);
    double sum = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < scene.sources.size(); ++i) {
        const double truth = scene.sources[i].freq_hz;
        if (!(truth > 0.0)) continue;
        const double e = std::isnan(matched[i]) ? 100.0 : std::min(100.0, detection_error(truth, {&matched[i], 1}));
        sum += e;
        ++n;
    }
    return n ? sum / n : 0.0;
}

RunStats summarize_runs(const std::string& modality, const Scene& scene, std::span<const DetectionReport> reports) {
    if (reports.empty()) throw ConfigError("need at least one run", "runs");
    RunStats stats;
    stats.modality = modality;
    stats.n_runs = static_cast<int>(reports.size());
    std::vector<double> errors;
    std::vector<double> sums(scene.sources.size(), 0.0);
    std::vector<int> counts(scene.sources.size(), 0);
    double time = 0.0;
    for (const auto& r : reports) {
        const auto matched = match_detections(scene, r);
        for (std::size_t i = 0; i < matched.size(); ++i) {
            stats.detected_freqs.push_back(matched[i]);
            if (!std::isnan(matched[i])) {
                sums[i] += matched[i];
                ++counts[i];
            }
        }
        errors.push_back(run_detection_error(scene, r));
        time += r.timing.total_consumed_s;
    }
    for (std::size_t i = 0; i < sums.size(); ++i) {
        stats.detected_means.push_back(counts[i] ? sums[i] / counts[i] : std::numeric_limits<double>::quiet_NaN());
    }
    const double n = static_cast<double>(errors.size());
    stats.detection_error_mean = std::accumulate(errors.begin(), errors.end(), 0.0) / n;
    if (errors.size() > 1) {
        double ss = 0.0;
        for (double e : errors) ss += (e - stats.detection_error_mean) * (e - stats.detection_error_mean);
        stats.detection_error_std = std::sqrt(ss / (n - 1.0));
    }
    stats.measurement_accuracy = measurement_accuracy(stats.detection_error_mean);
    stats.consumed_time_mean = time / n;
    return stats;
}

namespace {

nlohmann::ordered_json number_list(const std::vector<double>& values) {
    auto out = nlohmann::ordered_json::array();
    for (double v : values) {
        if (std::isnan(v)) {
            out.push_back(nullptr);
        } else {
            out.push_back(v);
        }
    }
    return out;
}

std::vector<double> read_number_list(const nlohmann::json& j, const std::string& field) {
    if (!j.is_array()) throw ConfigError("expected an array", field);
    std::vector<double> out;
    for (const auto& v : j) {
        if (v.is_null()) {
            out.push_back(std::numeric_limits<double>::quiet_NaN());
        } else if (v.is_number()) {
            out.push_back(v.get<double>());
        } else {
            throw ConfigError("expected numbers", field);
        }
    }
    return out;
}

template <typename T>
T required(const nlohmann::json& j, const std::string& key) {
    if (!j.contains(key)) throw ConfigError("missing field", key);
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("wrong type", key);
    }
}

}  // namespace

nlohmann::ordered_json to_json(const RunStats& s) {
    nlohmann::ordered_json j;
    j["modality"] = s.modality;
    j["n_runs"] = s.n_runs;
    j["detected_freqs"] = number_list(s.detected_freqs);
    j["detected_means"] = number_list(s.detected_means);
    j["detection_error_mean"] = s.detection_error_mean;
    j["detection_error_std"] = s.detection_error_std;
    j["measurement_accuracy"] = s.measurement_accuracy;
    j["consumed_time_mean"] = s.consumed_time_mean;
    j["reference"] = s.reference;
    return j;
}

RunStats run_stats_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("expected an object", "run_stats");
    RunStats s;
    s.modality = required<std::string>(j, "modality");
    s.n_runs = required<int>(j, "n_runs");
    if (s.n_runs < 1) throw ConfigError("must be >= 1", "n_runs");
    s.detection_error_mean = required<double>(j, "detection_error_mean");
    s.detection_error_std = required<double>(j, "detection_error_std");
    s.measurement_accuracy = required<double>(j, "measurement_accuracy");
    s.consumed_time_mean = required<double>(j, "consumed_time_mean");
    if (j.contains("detected_freqs")) s.detected_freqs = read_number_list(j["detected_freqs"], "detected_freqs");
    if (!j.contains("detected_means")) throw ConfigError("missing field", "detected_means");
    s.detected_means = read_number_list(j["detected_means"], "detected_means");
    if (j.contains("reference")) s.reference = required<bool>(j, "reference");
    return s;
}

std::filesystem::path default_reference_rows_path() {
    return std::filesystem::path(STROBEVIB_SOURCE_DIR) / "data" / "reference_rows.json";
}

std::vector<RunStats> load_reference_rows(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what(), path.string());
    }
    if (!j.contains("rows") || !j["rows"].is_array()) throw ConfigError("missing field", "rows");
    std::vector<RunStats> out;
    for (const auto& row : j["rows"]) {
        auto s = run_stats_from_json(row);
        s.reference = true;
        out.push_back(std::move(s));
    }
    return out;
}

ComparisonTable build_comparison_table(const std::map<std::string, RunStats>& runs,
                                       const std::vector<RunStats>& reference_rows) {
    ComparisonTable table;
    static const std::vector<std::string> order{"proposed", "rf_only", "strobe_linear", "strobe_crt"};
    for (const auto& name : order) {
        if (auto it = runs.find(name); it != runs.end()) table.rows.push_back(it->second);
    }
    for (const auto& [name, stats] : runs) {
        if (std::find(order.begin(), order.end(), name) == order.end()) table.rows.push_back(stats);
    }
    for (auto row : reference_rows) {
        row.reference = true;
        table.rows.push_back(std::move(row));
    }
    return table;
}

namespace {

std::string fixed(double v, int digits) {
    if (std::isnan(v)) return "n/a";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string join_detected(const RunStats& s, const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < s.detected_means.size(); ++i) {
        if (i) out += sep;
        out += fixed(s.detected_means[i], 2);
    }
    return out;
}

std::string status(const RunStats& s) { return s.reference ? "reference, not reproduced" : "simulated"; }

}  // namespace

std::string ComparisonTable::to_csv() const {
    std::ostringstream out;
    out << "modality,detected_hz,error_mean_pct,error_std_pct,accuracy_pct,consumed_time_s,n_runs,status\n";
    for (const auto& r : rows) {
        out << r.modality << ',' << join_detected(r, ";") << ',' << fixed(r.detection_error_mean, 4) << ','
            << fixed(r.detection_error_std, 4) << ',' << fixed(r.measurement_accuracy, 4) << ','
            << fixed(r.consumed_time_mean, 2) << ',' << r.n_runs << ",\"" << status(r) << "\"\n";
    }
    return out.str();
}

std::string ComparisonTable::to_text() const {
    const std::vector<std::string> header{"Modality", "Detected (Hz)", "Error mean+-std (%)", "Accuracy (%)",
                                          "Time (s)", "Runs", "Status"};
    std::vector<std::vector<std::string>> cells{header};
    for (const auto& r : rows) {
        cells.push_back({r.modality, join_detected(r, ", "),
                         fixed(r.detection_error_mean, 3) + " +- " + fixed(r.detection_error_std, 3),
                         fixed(r.measurement_accuracy, 2), fixed(r.consumed_time_mean, 1), std::to_string(r.n_runs),
                         status(r)});
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& row : cells) {
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    }
    std::ostringstream out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        for (std::size_t c = 0; c < cells[i].size(); ++c) {
            out << cells[i][c];
            if (c + 1 < cells[i].size()) out << std::string(width[c] - cells[i][c].size() + 2, ' ');
        }
        out << '\n';
        if (i == 0) {
            std::size_t total = 0;
            for (std::size_t c = 0; c < width.size(); ++c) total += width[c] + (c + 1 < width.size() ? 2 : 0);
            out << std::string(total, '-') << '\n';
        }
    }
    return out.str();
}

nlohmann::ordered_json ComparisonTable::to_json() const {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) arr.push_back(strobevib::to_json(r));
    return {{"rows", arr}};
}

}  // namespace strobevib
