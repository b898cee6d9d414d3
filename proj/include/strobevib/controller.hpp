#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "strobevib/radar_sim.hpp"
#include "strobevib/scene.hpp"
#include "strobevib/spectral.hpp"
#include "strobevib/vision.hpp"

namespace strobevib {

struct ControllerConfig {
    double radar_on = kDefaultRadarOnTime;
    double camera_on = 1.0;
    double freeze_threshold = 1.0;
    double alpha_max = 1.0;
    int max_refinements = 5;
    double duty = 0.10;
    /// Blade-count hypotheses per source group ("linear" -> {1}, "rotors" ->
    /// {3, 4}, ...). Candidates are generated from the union of all groups.
    std::map<std::string, std::set<int>> blade_hypotheses;
    /// Per-candidate processing overhead charged to the consumed-time ledger.
    double step_overhead = 1.0;
    /// Number of ROIs to segment; 0 uses the number of sources in the scene.
    int roi_count = 0;
    /// The first capture for a candidate strobes this far above it so the
    /// locked source drifts slowly instead of freezing outright.
    double localization_detune = 0.5;
    /// Minimum fraction of trajectory variance a single sinusoid must explain
    /// for an ROI to claim a candidate.
    double min_coherence = 0.8;
    /// ROIs whose centroids lie within this distance are the same object.
    double roi_match_px = 30.0;
    double radar_sample_rate = kDefaultRadarSampleRate;
    PeakSettings peaks;
    VisionSettings vision;
    /// Drift alarm: occupied band holding `drift_energy_fraction` of the
    /// energy within +/- `drift_half_window_hz` of a peak, compared against
    /// `drift_width_factor` times the record resolution 1 / radar_on.
    double drift_half_window_hz = 10.0;
    double drift_energy_fraction = 0.95;
    double drift_width_factor = 3.0;
    /// Strobe-only baselines.
    double scan_start_hz = 1.5;
    double scan_step_hz = 1.0;
    double scan_ceiling_hz = 150.0;
    std::vector<int> crt_moduli{29, 31};
    double crt_probe_offset_hz = 1.0;

    std::set<int> all_blade_hypotheses() const;
    void validate() const;
};

struct SourceDetection {
    int roi_id = 0;
    Vec2 roi_centroid;
    double detected_freq = 0.0;
    double detected_rpm = 0.0;
    double strobe_freq_final = 0.0;
    double residual = 0.0;
    int refinement_count = 0;
    double candidate = 0.0;
};

struct TimingLedger {
    double radar_s = 0.0;
    int camera_captures = 0;
    double camera_s = 0.0;
    double overhead_s = 0.0;
    double total_consumed_s = 0.0;
};

struct Alarm {
    std::string kind;
    double candidate = 0.0;
    double band_low = 0.0;
    double band_high = 0.0;
};

/// One strobe capture made while working on a candidate.
struct CaptureRecord {
    double strobe_freq = 0.0;
    std::string purpose;  // localize, refine, probe, scan, residue
    double residual = -1.0;  // -1 when no ROI qualified
};

struct CandidateAttempt {
    double candidate = 0.0;
    double peak_freq = 0.0;
    std::string outcome;  // resolved, rejected, unresolved
    std::vector<CaptureRecord> captures;
};

struct DetectionReport {
    std::string mode;
    std::uint64_t seed = 0;
    int expected_sources = 0;
    std::vector<Peak> peaks;
    double spectrum_resolution = 0.0;
    std::vector<double> candidates;
    std::vector<SourceDetection> sources;
    int unresolved = 0;
    TimingLedger timing;
    std::vector<Alarm> alarms;
    std::vector<CandidateAttempt> candidates_tried;

    bool all_resolved() const { return unresolved == 0 && alarms.empty(); }
};

nlohmann::ordered_json to_json(const DetectionReport& report);
void write_report_json(const DetectionReport& report, const std::filesystem::path& path);

/// Radar, candidates, then strobe/vision refinement per candidate.
DetectionReport run_rf_assisted_strobe(const Scene& scene, const ControllerConfig& cfg);

/// Radar only: every candidate frequency is reported as a detection.
DetectionReport run_rf_only(const Scene& scene, const ControllerConfig& cfg);

enum class StrobeOnlyMethod { linear_scan, crt };
DetectionReport run_strobe_only(const Scene& scene, StrobeOnlyMethod method, const ControllerConfig& cfg);

/// Alarm when the spectrum around `peak_hz` is spread wider than the
/// configured multiple of the resolution and the candidate never froze.
std::optional<Alarm> detect_drift(const Spectrum& spectrum, double peak_hz, double candidate_hz, bool froze,
                                  const ControllerConfig& cfg);

}  // namespace strobevib
