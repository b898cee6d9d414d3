#include "strobevib/controller.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "strobevib/error.hpp"
#include "strobevib/strobe_camera.hpp"

namespace strobevib {

std::set<int> ControllerConfig::all_blade_hypotheses() const {
    std::set<int> out;
    for (const auto& [group, set] : blade_hypotheses) out.insert(set.begin(), set.end());
    if (out.empty()) out.insert(1);
    return out;
}

void ControllerConfig::validate() const {
    if (!(radar_on > 0.0)) throw ConfigError("must be > 0", "controller.radar_on");
    if (!(camera_on > 0.0)) throw ConfigError("must be > 0", "controller.camera_on");
    if (!(freeze_threshold > 0.0)) throw ConfigError("must be > 0", "controller.freeze_threshold");
    if (!(alpha_max >= 0.0 && alpha_max <= 1.0)) throw ConfigError("must lie in [0, 1]", "controller.alpha_max");
    if (max_refinements < 1) throw ConfigError("must be >= 1", "controller.max_refinements");
    if (!(duty > 0.0 && duty <= 1.0)) throw ConfigError("must lie in (0, 1]", "controller.duty");
    if (step_overhead < 0.0) throw ConfigError("must be >= 0", "controller.step_overhead");
    if (roi_count < 0) throw ConfigError("must be >= 0", "controller.roi_count");
    for (const auto& [group, set] : blade_hypotheses) {
        if (set.empty()) throw ConfigError("empty hypothesis set", "controller.blade_hypotheses." + group);
        for (int m : set) {
            if (m < 1) throw ConfigError("blade counts must be >= 1", "controller.blade_hypotheses." + group);
        }
    }
    if (!(scan_step_hz > 0.0)) throw ConfigError("must be > 0", "controller.scan_step_hz");
    if (crt_moduli.empty()) throw ConfigError("need at least one modulus", "controller.crt_moduli");
}

namespace {

// Simulated sensing session: a clock that advances with every capture and
// the counters behind the consumed-time ledger.
class Session {
public:
    Session(const Scene& scene, const ControllerConfig& cfg, double radar_s)
        : scene_(scene), cfg_(cfg), radar_s_(radar_s), clock_(radar_s) {}

    FrameSequence capture(double strobe_hz) {
        StrobeSchedule schedule;
        schedule.freq = strobe_hz;
        schedule.duty = cfg_.duty;
        auto frames = render_frames(scene_, schedule, cfg_.camera_on, clock_);
        clock_ += cfg_.camera_on;
        ++captures_;
        return frames;
    }

    void charge_overhead() {
        overhead_ += cfg_.step_overhead;
        clock_ += cfg_.step_overhead;
    }

    TimingLedger ledger() const {
        TimingLedger t;
        t.radar_s = radar_s_;
        t.camera_captures = captures_;
        t.camera_s = captures_ * cfg_.camera_on;
        t.overhead_s = overhead_;
        t.total_consumed_s = t.radar_s + t.camera_s + t.overhead_s;
        return t;
    }

private:
    const Scene& scene_;
    const ControllerConfig& cfg_;
    double radar_s_;
    double clock_;
    int captures_ = 0;
    double overhead_ = 0.0;
};

struct RadarStage {
    Spectrum spectrum;
    PeakList peaks;
    std::vector<double> candidates;
    std::vector<double> candidate_peaks;  // source peak per candidate
};

RadarStage radar_stage(const Scene& scene, const ControllerConfig& cfg) {
    RadarStage out;
    auto trace = synthesize_doppler(scene, cfg.radar_on, cfg.radar_sample_rate);
    // Blade chopping leaves a large DC level whose window leakage would
    // otherwise dominate the lowest bins.
    double mean = 0.0;
    for (double v : trace.samples) mean += v;
    mean /= static_cast<double>(trace.samples.size());
    for (double& v : trace.samples) v -= mean;
    out.spectrum = power_spectrum(trace, Window::hann);
    out.peaks = detect_peaks(out.spectrum, cfg.peaks);
    const auto hyps = cfg.all_blade_hypotheses();
    out.candidates = candidate_frequencies(out.peaks, hyps, out.spectrum.resolution);
    for (double c : out.candidates) {
        double best = out.peaks.peaks.empty() ? c : out.peaks.peaks.front().freq;
        double best_err = std::numeric_limits<double>::max();
        for (const auto& p : out.peaks.peaks) {
            for (int m : hyps) {
                const double err = std::abs(p.freq / m - c);
                if (err < best_err) {
                    best_err = err;
                    best = p.freq;
                }
            }
        }
        out.candidate_peaks.push_back(best);
    }
    return out;
}

int expected_sources(const Scene& scene, const ControllerConfig& cfg) {
    return cfg.roi_count > 0 ? cfg.roi_count : static_cast<int>(scene.sources.size());
}

void fill_radar(DetectionReport& report, const RadarStage& radar) {
    report.peaks = radar.peaks.peaks;
    report.spectrum_resolution = radar.spectrum.resolution;
    report.candidates = radar.candidates;
}

struct RoiPick {
    int roi = 0;
    RoiFrequency freq;
    Vec2 centroid;
};

bool near_any(Vec2 p, const std::vector<Vec2>& others, double radius) {
    return std::any_of(others.begin(), others.end(), [&](Vec2 o) {
        return std::hypot(p.x - o.x, p.y - o.y) <= radius;
    });
}

// The unclaimed ROI showing the slowest coherent motion.
std::optional<RoiPick> pick_roi(const CaptureAnalysis& an, const std::vector<Vec2>& claimed,
                                const ControllerConfig& cfg) {
    std::optional<RoiPick> best;
    for (int r = 1; r <= an.segmentation.k; ++r) {
        const auto& f = an.rois[r - 1];
        const Vec2 c = an.segmentation.centroids[r - 1];
        if (f.is_static || f.coherence < cfg.min_coherence) continue;
        if (near_any(c, claimed, cfg.roi_match_px)) continue;
        if (!best || f.hz < best->freq.hz) best = RoiPick{r, f, c};
    }
    return best;
}

double residual_of(const RoiFrequency& f) { return f.is_static ? 0.0 : f.hz; }

void number_rois_left_to_right(std::vector<SourceDetection>& sources) {
    std::stable_sort(sources.begin(), sources.end(), [](const SourceDetection& a, const SourceDetection& b) {
        return a.roi_centroid.x < b.roi_centroid.x;
    });
    for (std::size_t i = 0; i < sources.size(); ++i) sources[i].roi_id = static_cast<int>(i) + 1;
}

void add_alarm(DetectionReport& report, const Alarm& alarm) {
    for (const auto& a : report.alarms) {
        if (alarm.band_low <= a.band_high && a.band_low <= alarm.band_high) return;
    }
    report.alarms.push_back(alarm);
}

}  // namespace

std::optional<Alarm> detect_drift(const Spectrum& spectrum, double peak_hz, double candidate_hz, bool froze,
                                  const ControllerConfig& cfg) {
    if (froze) return std::nullopt;
    const Band band = occupied_band(spectrum, peak_hz, cfg.drift_half_window_hz, cfg.drift_energy_fraction);
    // Zero padding refines the bin grid, not the resolving power of the record.
    const double resolution = std::max(spectrum.resolution, 1.0 / cfg.radar_on);
    if (band.width() <= cfg.drift_width_factor * resolution) return std::nullopt;
    return Alarm{"frequency_drift", candidate_hz, band.low, band.high};
}

DetectionReport run_rf_assisted_strobe(const Scene& scene, const ControllerConfig& cfg) {
    scene.validate();
    cfg.validate();
    DetectionReport report;
    report.mode = "proposed";
    report.seed = scene.seed;
    const int k = expected_sources(scene, cfg);
    report.expected_sources = k;

    const RadarStage radar = radar_stage(scene, cfg);
    fill_radar(report, radar);
    Session session(scene, cfg, cfg.radar_on);
    std::vector<Vec2> claimed;

    for (std::size_t ci = 0; ci < radar.candidates.size(); ++ci) {
        if (static_cast<int>(claimed.size()) >= k) break;
        const double c = radar.candidates[ci];
        session.charge_overhead();
        CandidateAttempt attempt;
        attempt.candidate = c;
        attempt.peak_freq = radar.candidate_peaks[ci];
        attempt.outcome = "rejected";
        bool froze = false;

        for (double detune : {cfg.localization_detune, -cfg.localization_detune}) {
            double strobe = c + detune;
            bool saw_roi = false;
            for (int step = 0;; ++step) {
                const auto frames = session.capture(strobe);
                const auto an = analyze_capture(frames, k, scene.seed, cfg.vision);
                const auto pick = pick_roi(an, claimed, cfg);
                attempt.captures.push_back({strobe, step == 0 ? "localize" : "refine", pick ? pick->freq.hz : -1.0});
                if (!pick) break;
                saw_roi = true;
                const double r = pick->freq.hz;

                // One capture at strobe + r tells which side of the strobe the
                // source sits on: it freezes if above, doubles if below.
                const auto probe_frames = session.capture(strobe + r);
                const auto probe = analyze_capture_with_rois(probe_frames, an.segmentation, cfg.vision);
                const double r2 = residual_of(probe.rois[pick->roi - 1]);
                attempt.captures.push_back({strobe + r, "probe", r2});
                const double sign = r2 < r ? 1.0 : -1.0;

                if (freeze_check(r, cfg.freeze_threshold)) {
                    SourceDetection det;
                    det.roi_centroid = pick->centroid;
                    det.detected_freq = strobe + sign * r;
                    det.detected_rpm = 60.0 * det.detected_freq;
                    det.strobe_freq_final = strobe;
                    det.residual = r;
                    det.refinement_count = step;
                    det.candidate = c;
                    report.sources.push_back(det);
                    claimed.push_back(pick->centroid);
                    froze = true;
                    attempt.outcome = "resolved";
                    break;
                }
                if (step >= cfg.max_refinements) {
                    attempt.outcome = "unresolved";
                    break;
                }
                strobe += sign * std::min(r, cfg.alpha_max);
            }
            if (froze || saw_roi) break;
        }
        if (auto alarm = detect_drift(radar.spectrum, attempt.peak_freq, c, froze, cfg)) add_alarm(report, *alarm);
        report.candidates_tried.push_back(std::move(attempt));
    }

    number_rois_left_to_right(report.sources);
    report.unresolved = std::max(0, k - static_cast<int>(report.sources.size()));
    report.timing = session.ledger();
    return report;
}

DetectionReport run_rf_only(const Scene& scene, const ControllerConfig& cfg) {
    scene.validate();
    cfg.validate();
    DetectionReport report;
    report.mode = "rf_only";
    report.seed = scene.seed;
    report.expected_sources = expected_sources(scene, cfg);
    const RadarStage radar = radar_stage(scene, cfg);
    fill_radar(report, radar);
    for (std::size_t i = 0; i < radar.candidates.size(); ++i) {
        SourceDetection det;
        det.detected_freq = radar.candidates[i];
        det.detected_rpm = 60.0 * det.detected_freq;
        det.candidate = radar.candidates[i];
        report.sources.push_back(det);
    }
    report.unresolved = std::max(0, report.expected_sources - static_cast<int>(report.sources.size()));
    Session session(scene, cfg, cfg.radar_on);
    report.timing = session.ledger();
    return report;
}

namespace {

void require_single_source(const Scene& scene) {
    if (scene.sources.size() > 1) {
        throw ConfigError("strobe-only baselines handle a single source, scene has " +
                              std::to_string(scene.sources.size()),
                          "scene.sources");
    }
}

// Sweeps the strobe upward and keeps the highest setting that froze the
// source. A sub-multiple of the true frequency also freezes, so stopping at
// the first freeze would under-report.
void linear_scan(const Scene& scene, const ControllerConfig& cfg, Session& session, DetectionReport& report) {
    CandidateAttempt attempt;
    attempt.outcome = "unresolved";
    std::vector<double> strobes, residuals;
    std::vector<bool> frozen;
    std::vector<Vec2> centroids;
    bool saw_motion = false;
    for (int i = 0;; ++i) {
        const double s = cfg.scan_start_hz + i * cfg.scan_step_hz;
        if (s > cfg.scan_ceiling_hz + 1e-9) break;
        const auto frames = session.capture(s);
        const auto an = analyze_capture(frames, 1, scene.seed, cfg.vision);
        for (const auto& f : an.rois) saw_motion = saw_motion || !f.is_static;
        const auto pick = pick_roi(an, {}, cfg);
        strobes.push_back(s);
        residuals.push_back(pick ? pick->freq.hz : -1.0);
        frozen.push_back(pick && freeze_check(pick->freq.hz, cfg.freeze_threshold));
        centroids.push_back(pick ? pick->centroid : Vec2{});
        attempt.captures.push_back({s, "scan", residuals.back()});
    }
    int h = -1;
    for (int i = static_cast<int>(frozen.size()) - 1; i >= 0; --i) {
        if (frozen[i]) {
            h = i;
            break;
        }
    }
    SourceDetection det;
    if (h >= 0) {
        const bool below = h > 0 && frozen[h - 1];
        det.detected_freq = strobes[h] + (below ? -residuals[h] : residuals[h]);
        det.strobe_freq_final = strobes[h];
        det.residual = residuals[h];
        det.roi_centroid = centroids[h];
    } else if (!saw_motion) {
        det.detected_freq = 0.0;  // nothing ever moved: a static source
    } else {
        report.candidates_tried.push_back(std::move(attempt));
        return;
    }
    det.detected_rpm = 60.0 * det.detected_freq;
    det.roi_id = 1;
    attempt.outcome = "resolved";
    attempt.candidate = det.detected_freq;
    report.sources.push_back(det);
    report.candidates_tried.push_back(std::move(attempt));
}

// One capture per modulus m gives the distance d from the true frequency to
// the nearest multiple of m; a second capture slightly above m tells whether
// the residue is d or m - d.
void crt_baseline(const Scene& scene, const ControllerConfig& cfg, Session& session, DetectionReport& report) {
    CandidateAttempt attempt;
    attempt.outcome = "unresolved";
    std::vector<Residue> residues;
    Vec2 centroid;
    for (int m : cfg.crt_moduli) {
        if (m < 2) throw ConfigError("moduli must be >= 2", "controller.crt_moduli");
        const auto frames = session.capture(m);
        const auto an = analyze_capture(frames, 1, scene.seed, cfg.vision);
        const auto pick = pick_roi(an, {}, cfg);
        double d = 0.0;
        double d2 = 0.0;
        if (pick) {
            d = pick->freq.hz;
            centroid = pick->centroid;
            const auto probe_frames = session.capture(m + cfg.crt_probe_offset_hz);
            const auto probe = analyze_capture_with_rois(probe_frames, an.segmentation, cfg.vision);
            d2 = residual_of(probe.rois[pick->roi - 1]);
            attempt.captures.push_back({double(m), "residue", d});
            attempt.captures.push_back({m + cfg.crt_probe_offset_hz, "probe", d2});
        } else {
            // No coherent motion at this strobe: the residue is unobservable.
            attempt.captures.push_back({double(m), "residue", -1.0});
            report.candidates_tried.push_back(std::move(attempt));
            return;
        }
        const bool upper = d2 > d + 0.5 * cfg.crt_probe_offset_hz;
        const long rounded = std::lround(upper ? m - d : d);
        residues.push_back({static_cast<std::uint64_t>(((rounded % m) + m) % m), static_cast<std::uint64_t>(m)});
    }
    try {
        SourceDetection det;
        det.detected_freq = static_cast<double>(crt_reconstruct(residues));
        det.detected_rpm = 60.0 * det.detected_freq;
        det.roi_id = 1;
        det.roi_centroid = centroid;
        attempt.candidate = det.detected_freq;
        attempt.outcome = "resolved";
        report.sources.push_back(det);
    } catch (const std::invalid_argument&) {
        // Inconsistent residues leave the source unresolved.
    }
    report.candidates_tried.push_back(std::move(attempt));
}

}  // namespace

DetectionReport run_strobe_only(const Scene& scene, StrobeOnlyMethod method, const ControllerConfig& cfg) {
    scene.validate();
    cfg.validate();
    require_single_source(scene);
    DetectionReport report;
    report.mode = method == StrobeOnlyMethod::linear_scan ? "strobe_linear" : "strobe_crt";
    report.seed = scene.seed;
    report.expected_sources = static_cast<int>(scene.sources.size());
    Session session(scene, cfg, 0.0);
    if (method == StrobeOnlyMethod::linear_scan) {
        linear_scan(scene, cfg, session, report);
    } else {
        crt_baseline(scene, cfg, session, report);
    }
    report.unresolved = std::max(0, report.expected_sources - static_cast<int>(report.sources.size()));
    report.timing = session.ledger();
    return report;
}

nlohmann::ordered_json to_json(const DetectionReport& report) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["mode"] = report.mode;
    j["seed"] = report.seed;
    j["expected_sources"] = report.expected_sources;
    j["all_resolved"] = report.all_resolved();
    j["unresolved"] = report.unresolved;
    ordered_json sources = ordered_json::array();
    for (const auto& s : report.sources) {
        sources.push_back({{"roi_id", s.roi_id},
                           {"roi_centroid", {s.roi_centroid.x, s.roi_centroid.y}},
                           {"detected_freq", s.detected_freq},
                           {"detected_rpm", s.detected_rpm},
                           {"strobe_freq_final", s.strobe_freq_final},
                           {"residual", s.residual},
                           {"refinement_count", s.refinement_count},
                           {"candidate", s.candidate}});
    }
    j["sources"] = sources;
    j["timing"] = {{"radar_s", report.timing.radar_s},
                   {"camera_captures", report.timing.camera_captures},
                   {"camera_s", report.timing.camera_s},
                   {"overhead_s", report.timing.overhead_s},
                   {"total_consumed_s", report.timing.total_consumed_s}};
    ordered_json alarms = ordered_json::array();
    for (const auto& a : report.alarms) {
        alarms.push_back({{"kind", a.kind}, {"candidate", a.candidate}, {"band", {a.band_low, a.band_high}}});
    }
    j["alarms"] = alarms;
    ordered_json peaks = ordered_json::array();
    for (const auto& p : report.peaks) peaks.push_back({{"freq", p.freq}, {"magnitude", p.magnitude}});
    j["peaks"] = peaks;
    j["spectrum_resolution"] = report.spectrum_resolution;
    j["candidates"] = report.candidates;
    ordered_json tried = ordered_json::array();
    for (const auto& t : report.candidates_tried) {
        ordered_json caps = ordered_json::array();
        for (const auto& c : t.captures) {
            caps.push_back({{"strobe_freq", c.strobe_freq}, {"purpose", c.purpose}, {"residual", c.residual}});
        }
        tried.push_back(
            {{"candidate", t.candidate}, {"peak_freq", t.peak_freq}, {"outcome", t.outcome}, {"captures", caps}});
    }
    j["candidates_tried"] = tried;
    return j;
}

void write_report_json(const DetectionReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << to_json(report).dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace strobevib
