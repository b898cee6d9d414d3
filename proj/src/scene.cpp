#include "strobevib/scene.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "strobevib/error.hpp"

namespace strobevib {

namespace {

// Integral of the triangular sweep offset tri(tau) in [0, 1] over [0, t].
double triangle_integral(double t, double period) {
    const double full = std::floor(t / period);
    const double u = t - full * period;
    const double half = 0.5 * period;
    double partial = 0.0;
    if (u <= half) {
        partial = u * u / period;
    } else {
        partial = 0.25 * period + 2.0 * (u - half) - (u * u - half * half) / period;
    }
    return full * half + partial;
}

double triangle_value(double t, double period) {
    const double u = t / period - std::floor(t / period);
    return u <= 0.5 ? 2.0 * u : 2.0 - 2.0 * u;
}

void require(bool ok, const std::string& field, const std::string& message) {
    if (!ok) throw ConfigError(message, field);
}

}  // namespace

double SourceSpec::effective_blade_width() const {
    return blade_width_rad > 0.0 ? blade_width_rad : kPi / std::max(blade_count, 1);
}

void Scene::validate() const {
    require(width > 0, "scene.width", "must be positive");
    require(height > 0, "scene.height", "must be positive");
    require(fps > 0.0, "scene.fps", "must be positive");
    require(wavelength_m > 0.0, "scene.wavelength_m", "must be positive");
    require(d0_m > 0.0, "scene.d0_m", "must be positive");
    require(px_per_mm > 0.0, "scene.px_per_mm", "must be positive");
    require(noise.pixel_noise_sigma >= 0.0, "scene.noise.pixel_noise_sigma", "must be non-negative");
    for (std::size_t i = 0; i < sources.size(); ++i) {
        const auto& s = sources[i];
        const std::string p = "scene.sources[" + std::to_string(i) + "].";
        require(s.freq_hz >= 0.0, p + "freq_hz", "must be non-negative");
        require(s.amplitude_mm >= 0.0, p + "amplitude_mm", "must be non-negative");
        require(s.reflectivity >= 0.0 && s.reflectivity <= 1.0, p + "reflectivity", "must lie in [0,1]");
        require(s.range_m >= 0.0, p + "range_m", "must be non-negative");
        require(s.center_px.x >= 0.0 && s.center_px.x < width && s.center_px.y >= 0.0 &&
                    s.center_px.y < height,
                p + "center_px", "must lie inside the image");
        if (s.kind == SourceKind::rotor) {
            require(s.blade_count >= 1, p + "blade_count", "must be >= 1 for rotors");
        } else {
            require(std::hypot(s.axis.x, s.axis.y) > 0.0, p + "axis", "must be non-zero");
        }
        if (s.wobble) {
            require(s.wobble->amp_x_mm >= 0.0, p + "wobble.amp_x_mm", "must be non-negative");
            require(s.wobble->amp_y_mm >= 0.0, p + "wobble.amp_y_mm", "must be non-negative");
            require(s.wobble->freq_hz >= 0.0, p + "wobble.freq_hz", "must be non-negative");
        }
        if (s.drift) {
            require(s.drift->period_s > 0.0, p + "drift.period_s", "must be positive");
            require(s.drift->end_freq_hz >= 0.0, p + "drift.end_freq_hz", "must be non-negative");
        }
    }
}

double off_null_range(double wavelength_m, double nominal_m) {
    // 4 pi d / lambda = pi/2 + 2 pi k  <=>  d = lambda/8 + k lambda/2
    const double k = std::round((nominal_m - wavelength_m / 8.0) / (wavelength_m / 2.0));
    return wavelength_m / 8.0 + k * wavelength_m / 2.0;
}

double source_cycles(const SourceSpec& source, double t) {
    if (!source.drift) return source.freq_hz * t;
    const double span = source.drift->end_freq_hz - source.freq_hz;
    return source.freq_hz * t + span * triangle_integral(t, source.drift->period_s);
}

double source_frequency(const SourceSpec& source, double t) {
    if (!source.drift) return source.freq_hz;
    const double span = source.drift->end_freq_hz - source.freq_hz;
    return source.freq_hz + span * triangle_value(t, source.drift->period_s);
}

Vec2 ground_truth_displacement(const SourceSpec& source, double t) {
    if (source.kind == SourceKind::rotor) {
        if (!source.wobble) return {};
        const auto& w = *source.wobble;
        const double arg = kTwoPi * w.freq_hz * t;
        return {w.x0_mm + w.amp_x_mm * std::cos(arg), w.y0_mm + w.amp_y_mm * std::sin(arg)};
    }
    const double norm = std::hypot(source.axis.x, source.axis.y);
    const double d = source.amplitude_mm *
                     std::sin(kTwoPi * source_cycles(source, t) + source.phase_rad);
    return {d * source.axis.x / norm, d * source.axis.y / norm};
}

double rotor_angle(const SourceSpec& source, double t) {
    return kTwoPi * source_cycles(source, t) + source.phase_rad;
}

namespace {

// Blade-pass coordinate: integer part counts blade passages over the beam,
// the pulse occupies [0, fill) of each unit interval.
double blade_pass_coordinate(const SourceSpec& source, double t, double fill) {
    const double pitch = kTwoPi / source.blade_count;
    return rotor_angle(source, t) / pitch + 0.5 * fill;
}

double occupancy_cumulative(double u, double fill) {
    const double whole = std::floor(u);
    return whole * fill + std::min(u - whole, fill);
}

void require_rotor(const SourceSpec& source) {
    if (source.kind != SourceKind::rotor) {
        throw ConfigError("blade occupancy is only defined for rotor sources", source.id);
    }
}

}  // namespace

double blade_occupancy(const SourceSpec& source, double t) {
    require_rotor(source);
    const double fill = std::min(1.0, source.effective_blade_width() * source.blade_count / kTwoPi);
    const double u = blade_pass_coordinate(source, t, fill);
    return (u - std::floor(u)) < fill ? 1.0 : 0.0;
}

double blade_occupancy_mean(const SourceSpec& source, double t0, double t1) {
    require_rotor(source);
    const double fill = std::min(1.0, source.effective_blade_width() * source.blade_count / kTwoPi);
    const double u0 = blade_pass_coordinate(source, t0, fill);
    const double u1 = blade_pass_coordinate(source, t1, fill);
    if (u1 - u0 <= 1e-12) return blade_occupancy(source, t0);
    return (occupancy_cumulative(u1, fill) - occupancy_cumulative(u0, fill)) / (u1 - u0);
}

}  // namespace strobevib
