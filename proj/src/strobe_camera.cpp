#include "strobevib/strobe_camera.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>

#include <json.hpp>

#include "strobevib/error.hpp"

namespace strobevib {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t capture_seed(std::uint64_t scene_seed, double start_time) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &start_time, sizeof bits);
    return splitmix64(scene_seed ^ splitmix64(bits));
}

double smoothstep_edge(double signed_distance) {
    // 1 inside, 0 outside, linear over one pixel.
    return std::clamp(0.5 - signed_distance, 0.0, 1.0);
}

Vec2 visible(Vec2 d, CameraView view) {
    switch (view) {
        case CameraView::horizontal: return {d.x, 0.0};
        case CameraView::vertical: return {0.0, d.y};
        case CameraView::front: break;
    }
    return d;
}

// Radiance of a linear source's textured patch at patch-local (u, v); the
// coverage weight is returned through `coverage`.
double patch_radiance(const SourceSpec& s, double u, double v, double& coverage) {
    const double h = s.patch_half_px;
    const double outside = std::max(std::abs(u), std::abs(v)) - h;
    coverage = smoothstep_edge(outside);
    if (coverage <= 0.0) return 0.0;
    // Two-tone, deliberately asymmetric texture so the flow is well conditioned
    // in both directions.
    const double t = 0.55 * std::sin(kTwoPi * u / 11.0 + 0.7) * std::cos(kTwoPi * v / 9.0) +
                     0.35 * std::sin(kTwoPi * (u + 2.0 * v) / 17.0) + 0.25 * std::tanh((u - 0.3 * v) / 3.0);
    return 165.0 + 70.0 * std::clamp(t, -1.0, 1.0);
}

double rotor_radiance(const SourceSpec& s, double radius_px, double dx, double dy, double angle,
                      double& coverage) {
    const double r = std::hypot(dx, dy);
    coverage = smoothstep_edge(r - radius_px);
    if (coverage <= 0.0) return 0.0;
    if (r < 0.15 * radius_px) return 120.0;
    const double pitch = kTwoPi / s.blade_count;
    const double local = std::atan2(dy, dx) - angle;
    // Key feature: a bright disc between blade 0 and blade 1. Real rotors are
    // never perfectly symmetric; this sets the visual period to one turn.
    const double key_angle = 0.5 * pitch;
    const double kx = 0.55 * radius_px * std::cos(key_angle + angle);
    const double ky = 0.55 * radius_px * std::sin(key_angle + angle);
    const double key_cov = smoothstep_edge(std::hypot(dx - kx, dy - ky) - 0.22 * radius_px);
    double wrapped = local / pitch;
    wrapped = (wrapped - std::round(wrapped)) * pitch;  // angular distance to the nearest blade center
    const double half_blade = 0.25 * s.effective_blade_width();
    const double blade_cov = smoothstep_edge((std::abs(wrapped) - half_blade) * r);
    const double base = 200.0 * (1.0 - blade_cov) + 70.0 * blade_cov;
    return base * (1.0 - key_cov) + 250.0 * key_cov;
}

struct SourceBox {
    int x0, y0, x1, y1;
};

SourceBox source_box(const Scene& scene, const SourceSpec& s) {
    double reach = 0.0;
    if (s.kind == SourceKind::rotor) {
        reach = s.amplitude_mm * scene.px_per_mm;
        if (s.wobble) reach += scene.px_per_mm * std::max(s.wobble->amp_x_mm, s.wobble->amp_y_mm);
    } else {
        reach = s.patch_half_px * std::sqrt(2.0) + s.amplitude_mm * scene.px_per_mm;
    }
    reach += 2.0;
    return {std::max(0, static_cast<int>(std::floor(s.center_px.x - reach))),
            std::max(0, static_cast<int>(std::floor(s.center_px.y - reach))),
            std::min(scene.width - 1, static_cast<int>(std::ceil(s.center_px.x + reach))),
            std::min(scene.height - 1, static_cast<int>(std::ceil(s.center_px.y + reach)))};
}

std::vector<double> exposure_instants(const StrobeSchedule& schedule, const RenderOptions& options,
                                      double t0, double t1) {
    std::vector<double> out;
    if (!schedule.enabled) {
        const int k = std::max(1, options.ambient_substeps);
        for (int i = 0; i < k; ++i) out.push_back(t0 + (i + 0.5) * (t1 - t0) / k);
        return out;
    }
    const double period = 1.0 / schedule.freq;
    const double offset = schedule.phase / kTwoPi * period;
    const double width = schedule.duty * period;
    const int n = std::max(1, options.pulse_samples);
    const auto first = static_cast<long long>(std::floor((t0 - offset - width) / period));
    for (long long k = first;; ++k) {
        const double onset = offset + static_cast<double>(k) * period;
        if (onset >= t1) break;
        for (int j = 0; j < n; ++j) {
            const double t = onset + (j + 0.5) * width / n;
            if (t >= t0 && t < t1) out.push_back(t);
        }
    }
    return out;
}

}  // namespace

void StrobeSchedule::validate() const {
    if (enabled && !(freq > 0.0)) throw ConfigError("must be positive when the strobe is enabled", "schedule.freq");
    if (!(duty > 0.0 && duty <= 1.0)) throw ConfigError("must lie in (0, 1]", "schedule.duty");
}

FrameSequence render_frames(const Scene& scene, const StrobeSchedule& schedule, double capture_duration,
                            double start_time, const RenderOptions& options) {
    if (scene.width <= 0 || scene.height <= 0) throw ConfigError("image must be non-empty", "scene.width");
    if (!(scene.fps > 0.0)) throw ConfigError("must be positive", "scene.fps");
    if (!(capture_duration > 0.0)) throw ConfigError("must be positive", "capture_duration");
    schedule.validate();

    FrameSequence seq;
    seq.fps = scene.fps;
    seq.capture_duration = capture_duration;
    seq.start_time = start_time;
    seq.schedule = schedule;
    seq.seed = capture_seed(scene.seed, start_time);
    const auto count = static_cast<int>(std::llround(scene.fps * capture_duration));

    std::vector<SourceBox> boxes;
    for (const auto& s : scene.sources) boxes.push_back(source_box(scene, s));

    const std::size_t npix = static_cast<std::size_t>(scene.width) * scene.height;
    std::vector<double> sum(npix), sum_sq(npix);
    for (int i = 0; i < count; ++i) {
        const double t0 = start_time + i / scene.fps;
        const double t1 = start_time + (i + 1) / scene.fps;
        const auto instants = exposure_instants(schedule, options, t0, t1);
        const double bg = scene.background_gray;
        std::fill(sum.begin(), sum.end(), 0.0);
        std::fill(sum_sq.begin(), sum_sq.end(), 0.0);

        double blur = 0.0;
        std::size_t blur_pixels = 0;
        for (std::size_t si = 0; si < scene.sources.size(); ++si) {
            const auto& s = scene.sources[si];
            const auto& b = boxes[si];
            const double radius_px = s.amplitude_mm * scene.px_per_mm;
            for (double t : instants) {
                Vec2 disp = ground_truth_displacement(s, t);
                if (s.kind == SourceKind::rotor && s.wobble) disp = disp - Vec2{s.wobble->x0_mm, s.wobble->y0_mm};
                const Vec2 c = s.center_px + scene.px_per_mm * visible(disp, options.view);
                const double angle = s.kind == SourceKind::rotor ? rotor_angle(s, t) : 0.0;
                for (int y = b.y0; y <= b.y1; ++y) {
                    for (int x = b.x0; x <= b.x1; ++x) {
                        const double dx = x - c.x, dy = y - c.y;
                        double cov = 0.0;
                        const double rad = s.kind == SourceKind::rotor
                                               ? rotor_radiance(s, radius_px, dx, dy, angle, cov)
                                               : patch_radiance(s, dx, dy, cov);
                        const double delta = cov * (rad - bg);
                        const std::size_t idx = static_cast<std::size_t>(y) * scene.width + x;
                        sum[idx] += delta;
                        sum_sq[idx] += delta * delta;
                    }
                }
            }
            if (!instants.empty()) {
                const double n = static_cast<double>(instants.size());
                for (int y = b.y0; y <= b.y1; ++y) {
                    for (int x = b.x0; x <= b.x1; ++x) {
                        const std::size_t idx = static_cast<std::size_t>(y) * scene.width + x;
                        const double mean = sum[idx] / n;
                        blur += std::max(0.0, sum_sq[idx] / n - mean * mean);
                        ++blur_pixels;
                    }
                }
            }
        }

        std::mt19937_64 rng(seq.seed ^ static_cast<std::uint64_t>(i));
        std::normal_distribution<double> noise(0.0, scene.noise.pixel_noise_sigma);
        const bool noisy = options.add_noise && scene.noise.pixel_noise_sigma > 0.0;
        Gray8 frame(scene.width, scene.height);
        const double n = static_cast<double>(instants.size());
        for (std::size_t p = 0; p < npix; ++p) {
            double v = scene.ambient_gray;
            if (n > 0) v += bg + sum[p] / n;
            if (noisy) v += noise(rng);
            frame.pixels[p] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
        seq.frames.push_back(std::move(frame));
        seq.lit_samples.push_back(static_cast<int>(instants.size()));
        seq.blur_energy.push_back(blur_pixels ? blur / static_cast<double>(blur_pixels) : 0.0);
    }
    return seq;
}

double apparent_frequency(double f_true, double f_strobe, double fps) {
    const double n = std::floor(f_true / f_strobe);
    const double d = std::min(std::abs(f_true - n * f_strobe), std::abs(f_true - (n + 1.0) * f_strobe));
    double folded = std::fmod(d, fps);
    if (folded > 0.5 * fps) folded = fps - folded;
    return folded;
}

void write_frame_sequence(const FrameSequence& seq, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    char name[32];
    for (std::size_t i = 0; i < seq.frames.size(); ++i) {
        std::snprintf(name, sizeof name, "frame_%04zu.pgm", i);
        write_pgm(seq.frames[i], dir / name);
    }
    nlohmann::json meta{{"fps", seq.fps},
                        {"capture_duration", seq.capture_duration},
                        {"start_time", seq.start_time},
                        {"seed", seq.seed},
                        {"frames", seq.frames.size()},
                        {"lit_samples", seq.lit_samples},
                        {"schedule",
                         {{"freq", seq.schedule.freq},
                          {"duty", seq.schedule.duty},
                          {"phase", seq.schedule.phase},
                          {"enabled", seq.schedule.enabled}}}};
    std::ofstream out(dir / "frames.json");
    out << meta.dump(2) << "\n";
    if (!out) throw IoError("failed writing " + (dir / "frames.json").string());
}

}  // namespace strobevib
