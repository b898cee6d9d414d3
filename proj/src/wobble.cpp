#include "strobevib/wobble.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <Eigen/Dense>
#include <json.hpp>

#include "strobevib/error.hpp"
#include "strobevib/strobe_camera.hpp"

namespace strobevib {

double WobbleTrajectory::rms_radius() const {
    if (points.empty()) return 0.0;
    double s = 0.0;
    for (const auto& p : points) s += p.x * p.x + p.y * p.y;
    return std::sqrt(s / static_cast<double>(points.size()));
}

WobbleTrajectory WobbleTrajectory::normalized() const {
    WobbleTrajectory out = *this;
    const double r = rms_radius();
    if (r > 0.0) {
        for (auto& p : out.points) p = (1.0 / r) * p;
    }
    return out;
}

namespace {

// Least-squares fit of c0 + c1 t + a cos(2 pi f t) + b sin(2 pi f t).
Eigen::Vector4d fit_trend_sine(const std::vector<double>& t, const std::vector<double>& y, double f,
                               double& residual) {
    Eigen::MatrixXd design(t.size(), 4);
    Eigen::VectorXd rhs(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double arg = kTwoPi * f * t[i];
        design.row(i) << 1.0, t[i], std::cos(arg), std::sin(arg);
        rhs(i) = y[i];
    }
    const Eigen::Vector4d coef = design.colPivHouseholderQr().solve(rhs);
    residual = (rhs - design * coef).squaredNorm();
    return coef;
}

// Summing frame-to-frame flow integrates any small flow bias into a ramp.
// The ramp is estimated jointly with the dominant sinusoid (a ramp alone is
// not orthogonal to a sinusoid over a finite record) and removed along with
// the mean.
void remove_drift(const std::vector<double>& t, std::vector<double>& y, double fps) {
    const std::size_t n = y.size();
    if (n < 5) {
        double mean = 0.0;
        for (double v : y) mean += v / static_cast<double>(n);
        for (double& v : y) v -= mean;
        return;
    }
    double best_res = std::numeric_limits<double>::max();
    Eigen::Vector4d best = Eigen::Vector4d::Zero();
    for (int i = 0;; ++i) {
        const double f = 0.5 + 0.01 * i;
        if (f > 0.5 * fps + 1e-9) break;
        double res = 0.0;
        const auto coef = fit_trend_sine(t, y, f, res);
        if (res < best_res) {
            best_res = res;
            best = coef;
        }
    }
    for (std::size_t i = 0; i < n; ++i) y[i] -= best(0) + best(1) * t[i];
}

double segment_distance(Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 ab = b - a, ap = p - a;
    const double len2 = ab.x * ab.x + ab.y * ab.y;
    double u = len2 > 0.0 ? (ap.x * ab.x + ap.y * ab.y) / len2 : 0.0;
    u = std::clamp(u, 0.0, 1.0);
    const Vec2 d = ap - u * ab;
    return std::hypot(d.x, d.y);
}

// Least-squares fit of c + a cos(2 pi f t) + b sin(2 pi f t); returns (a, b)
// and the explained sum of squares.
struct SineFit {
    double a = 0.0;
    double b = 0.0;
    double explained = 0.0;
};

SineFit fit_sine(const std::vector<double>& t, const std::vector<double>& y, double f) {
    Eigen::MatrixXd design(t.size(), 3);
    Eigen::VectorXd rhs(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double arg = kTwoPi * f * t[i];
        design(i, 0) = 1.0;
        design(i, 1) = std::cos(arg);
        design(i, 2) = std::sin(arg);
        rhs(i) = y[i];
    }
    const Eigen::Vector3d coef = design.colPivHouseholderQr().solve(rhs);
    const Eigen::VectorXd resid = rhs - design * coef;
    const double mean = rhs.mean();
    const double ss_tot = (rhs.array() - mean).square().sum();
    return {coef(1), coef(2), std::max(0.0, ss_tot - resid.squaredNorm())};
}

}  // namespace

FusionResult fuse_dual_view(const RoiTrajectory& horizontal, const RoiTrajectory& vertical,
                            const std::map<int, int>& roi_matching, double px_per_mm) {
    if (!(px_per_mm > 0.0)) throw ConfigError("must be > 0", "px_per_mm");
    if (horizontal.fps != vertical.fps) throw ConfigError("views were captured at different frame rates", "fps");
    FusionResult out;
    for (const auto& [h_id, v_id] : roi_matching) {
        if (h_id < 1 || h_id > horizontal.roi_count || v_id < 1 || v_id > vertical.roi_count) {
            out.warnings.push_back("ROI pair " + std::to_string(h_id) + "/" + std::to_string(v_id) +
                                   " not present in both views, skipped");
            continue;
        }
        const auto hs = horizontal.series(h_id);
        const auto hx = horizontal.accumulated_xy(h_id);
        const auto vy = vertical.accumulated_xy(v_id);
        const auto diff = static_cast<long>(hx.size()) - static_cast<long>(vy.size());
        if (std::abs(diff) > 1) {
            throw ConfigError("views differ by " + std::to_string(std::abs(diff)) + " samples for ROI " +
                                  std::to_string(h_id),
                              "roi_matching");
        }
        WobbleTrajectory w;
        w.roi_id = h_id;
        w.fps = horizontal.fps;
        const std::size_t n = std::min(hx.size(), vy.size());
        for (std::size_t i = 0; i < n; ++i) {
            w.t.push_back(hs[i].t);
            w.points.push_back({hx[i].x / px_per_mm, vy[i].y / px_per_mm});
        }
        std::vector<double> xs, ys;
        for (const auto& p : w.points) {
            xs.push_back(p.x);
            ys.push_back(p.y);
        }
        remove_drift(w.t, xs, w.fps);
        remove_drift(w.t, ys, w.fps);
        for (std::size_t i = 0; i < n; ++i) w.points[i] = {xs[i], ys[i]};
        out.orbits.push_back(std::move(w));
    }
    return out;
}

double trajectory_error(const WobbleTrajectory& measured, const WobbleTrajectory& reference) {
    if (reference.points.size() < 2) throw ConfigError("reference orbit needs at least two points", "reference");
    Vec2 center;
    for (const auto& p : reference.points) center = center + p;
    center = (1.0 / static_cast<double>(reference.points.size())) * center;
    double r2 = 0.0;
    for (const auto& p : reference.points) {
        const Vec2 d = p - center;
        r2 += d.x * d.x + d.y * d.y;
    }
    const double radius = std::sqrt(r2 / static_cast<double>(reference.points.size()));
    if (!(radius > 1e-12)) throw ConfigError("reference orbit has zero radius", "reference");
    if (measured.points.empty()) throw ConfigError("measured orbit is empty", "measured");

    const auto& ref = reference.points;
    double total = 0.0;
    for (const auto& p : measured.points) {
        double best = std::numeric_limits<double>::max();
        for (std::size_t i = 0; i < ref.size(); ++i) {
            best = std::min(best, segment_distance(p, ref[i], ref[(i + 1) % ref.size()]));
        }
        total += best;
    }
    return 100.0 * total / static_cast<double>(measured.points.size()) / radius;
}

ImbalanceFit classify_imbalance(const WobbleTrajectory& traj, double radius_threshold) {
    if (traj.points.size() < 4 || traj.t.size() != traj.points.size()) {
        throw ConfigError("need at least 4 timed samples, got " + std::to_string(traj.points.size()), "trajectory");
    }
    if (!(traj.fps > 0.0)) throw ConfigError("must be > 0", "trajectory.fps");
    if (radius_threshold < 0.0) throw ConfigError("must be >= 0", "radius_threshold");
    ImbalanceFit fit;
    if (traj.rms_radius() == 0.0) return fit;

    std::vector<double> xs, ys;
    for (const auto& p : traj.points) {
        xs.push_back(p.x);
        ys.push_back(p.y);
    }
    // Below one cycle per record, or right at Nyquist, cos and sin become
    // nearly collinear with the offset and noise fits to huge amplitudes.
    const double step = 0.01;
    const double span = traj.t.back() - traj.t.front() + 1.0 / traj.fps;
    const double f_min = std::max(0.05, 1.0 / span);
    const double nyquist = 0.45 * traj.fps;
    double best_f = f_min, best_p = -1.0;
    for (int i = 0;; ++i) {
        const double f = f_min + i * step;
        if (f > nyquist + 1e-9) break;
        const double p = fit_sine(traj.t, xs, f).explained + fit_sine(traj.t, ys, f).explained;
        if (p > best_p) {
            best_p = p;
            best_f = f;
        }
    }
    // Polish the grid peak with a golden-section search on the explained power.
    double lo = std::max(f_min, best_f - step), hi = std::min(nyquist, best_f + step);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    auto power = [&](double f) { return fit_sine(traj.t, xs, f).explained + fit_sine(traj.t, ys, f).explained; };
    for (int it = 0; it < 40; ++it) {
        const double m1 = hi - g * (hi - lo), m2 = lo + g * (hi - lo);
        if (power(m1) > power(m2)) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    fit.freq_hz = 0.5 * (lo + hi);
    const auto fx = fit_sine(traj.t, xs, fit.freq_hz);
    const auto fy = fit_sine(traj.t, ys, fit.freq_hz);
    fit.amp_x = std::hypot(fx.a, fx.b);
    fit.amp_y = std::hypot(fy.a, fy.b);
    fit.balance = std::max(fit.amp_x, fit.amp_y) < radius_threshold ? Balance::balanced : Balance::imbalanced;
    return fit;
}

WobbleTrajectory reference_orbit(const SourceSpec& source, int samples) {
    WobbleTrajectory out;
    out.roi_id = 0;
    if (samples < 2) throw ConfigError("must be >= 2", "samples");
    if (!source.wobble || source.wobble->balanced() || !(source.wobble->freq_hz > 0.0)) {
        out.points.assign(samples, Vec2{});
        out.t.assign(samples, 0.0);
        return out;
    }
    const auto& w = *source.wobble;
    const double period = 1.0 / w.freq_hz;
    out.fps = samples / period;
    for (int i = 0; i < samples; ++i) {
        const double t = period * i / samples;
        out.t.push_back(t);
        out.points.push_back({w.amp_x_mm * std::cos(kTwoPi * w.freq_hz * t),
                              w.amp_y_mm * std::sin(kTwoPi * w.freq_hz * t)});
    }
    return out;
}

void WobbleConfig::validate() const {
    if (strobe_hz < 0.0) throw ConfigError("must be >= 0", "wobble.strobe_hz");
    if (!(capture_s > 0.0)) throw ConfigError("must be > 0", "wobble.capture_s");
    if (!(duty > 0.0 && duty <= 1.0)) throw ConfigError("must lie in (0, 1]", "wobble.duty");
    if (radius_threshold_mm < 0.0) throw ConfigError("must be >= 0", "wobble.radius_threshold_mm");
    if (roi_count < 0) throw ConfigError("must be >= 0", "wobble.roi_count");
}

WobbleReport run_wobble(const Scene& scene, const WobbleConfig& cfg) {
    scene.validate();
    cfg.validate();
    WobbleReport report;
    report.seed = scene.seed;
    double strobe = cfg.strobe_hz;
    if (strobe == 0.0) {
        for (const auto& s : scene.sources) {
            if (s.kind == SourceKind::rotor) {
                strobe = s.freq_hz;
                break;
            }
        }
    }
    if (!(strobe > 0.0)) throw ConfigError("no rotor to lock the strobe to", "wobble.strobe_hz");
    report.strobe_hz = strobe;
    const int k = cfg.roi_count > 0 ? cfg.roi_count : static_cast<int>(scene.sources.size());
    if (k < 1) throw ConfigError("scene has no sources", "scene.sources");

    StrobeSchedule schedule;
    schedule.duty = cfg.duty;
    schedule.freq = strobe + cfg.localization_detune;
    const auto localize = render_frames(scene, schedule, cfg.capture_s, 0.0);
    const auto seg = analyze_capture(localize, k, scene.seed, cfg.vision).segmentation;

    // Both cameras expose the same window under the locked strobe.
    schedule.freq = strobe;
    RenderOptions h_opts, v_opts;
    h_opts.view = CameraView::horizontal;
    v_opts.view = CameraView::vertical;
    const auto h_frames = render_frames(scene, schedule, cfg.capture_s, cfg.capture_s, h_opts);
    const auto v_frames = render_frames(scene, schedule, cfg.capture_s, cfg.capture_s, v_opts);
    const auto h_traj = accumulate_trajectory(h_frames, seg, cfg.vision);
    const auto v_traj = accumulate_trajectory(v_frames, seg, cfg.vision);

    std::map<int, int> matching;
    for (int r = 1; r <= seg.k; ++r) matching[r] = r;
    auto fused = fuse_dual_view(h_traj, v_traj, matching, scene.px_per_mm);
    report.warnings = fused.warnings;

    for (auto& orbit : fused.orbits) {
        WobbleRoiResult res;
        res.roi_id = orbit.roi_id;
        res.centroid = seg.centroids[orbit.roi_id - 1];
        const SourceSpec* nearest = nullptr;
        double best = std::numeric_limits<double>::max();
        for (const auto& s : scene.sources) {
            const double d = std::hypot(s.center_px.x - res.centroid.x, s.center_px.y - res.centroid.y);
            if (d < best) {
                best = d;
                nearest = &s;
            }
        }
        if (orbit.points.size() < 4) {
            report.warnings.push_back("ROI " + std::to_string(orbit.roi_id) + " has too few lit frames");
            continue;
        }
        res.fit = classify_imbalance(orbit, cfg.radius_threshold_mm);
        if (nearest) {
            res.source_id = nearest->id;
            if (nearest->wobble && !nearest->wobble->balanced()) {
                res.error_pct = trajectory_error(orbit.normalized(), reference_orbit(*nearest).normalized());
            }
        }
        res.orbit = std::move(orbit);
        report.rois.push_back(std::move(res));
    }
    return report;
}

void write_orbit_csv(const WobbleTrajectory& traj, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "t,x,y,roi_id\n";
    char line[128];
    for (std::size_t i = 0; i < traj.points.size(); ++i) {
        std::snprintf(line, sizeof line, "%.6f,%.6f,%.6f,%d\n", traj.t[i], traj.points[i].x, traj.points[i].y,
                      traj.roi_id);
        out << line;
    }
    if (!out) throw IoError("failed writing " + path.string());
}

void write_wobble_json(const WobbleReport& report, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["seed"] = report.seed;
    j["strobe_hz"] = report.strobe_hz;
    auto rois = nlohmann::ordered_json::array();
    for (const auto& r : report.rois) {
        nlohmann::ordered_json e;
        e["roi_id"] = r.roi_id;
        e["centroid"] = {r.centroid.x, r.centroid.y};
        e["source_id"] = r.source_id;
        e["classification"] = r.fit.balance == Balance::balanced ? "balanced" : "imbalanced";
        e["amp_x_mm"] = r.fit.amp_x;
        e["amp_y_mm"] = r.fit.amp_y;
        e["wobble_freq_hz"] = r.fit.freq_hz;
        if (r.error_pct) {
            e["trajectory_error_pct"] = *r.error_pct;
        } else {
            e["trajectory_error_pct"] = nullptr;
        }
        e["orbit_samples"] = r.orbit.points.size();
        rois.push_back(e);
    }
    j["rois"] = rois;
    j["warnings"] = report.warnings;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace strobevib
