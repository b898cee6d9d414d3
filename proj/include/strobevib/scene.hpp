#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace strobevib {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kSpeedOfLight = 299792458.0;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend bool operator==(Vec2, Vec2) = default;
};

enum class SourceKind { linear, rotor };

/// Center-of-mass whirl of an imbalanced rotor:
///   x(t) = x0 + amp_x cos(2 pi freq t),  y(t) = y0 + amp_y sin(2 pi freq t)
struct Wobble {
    double amp_x_mm = 0.0;
    double amp_y_mm = 0.0;
    double freq_hz = 0.0;
    double x0_mm = 0.0;
    double y0_mm = 0.0;

    bool balanced() const { return amp_x_mm == 0.0 && amp_y_mm == 0.0; }
};

/// Triangular frequency sweep: the source frequency ramps from `freq_hz` to
/// `end_freq_hz` over half a period and back over the other half.
struct Drift {
    double end_freq_hz = 0.0;
    double period_s = 0.0;
};

struct SourceSpec {
    std::string id;
    SourceKind kind = SourceKind::linear;
    Vec2 center_px;
    double range_m = 0.0;  // 0 selects Scene::d0_m
    double amplitude_mm = 1.0;  // vibration amplitude (linear) or blade radius (rotor)
    double freq_hz = 0.0;
    double phase_rad = 0.0;
    int blade_count = 1;
    std::optional<Wobble> wobble;
    std::optional<Drift> drift;
    double reflectivity = 1.0;
    Vec2 axis{1.0, 0.0};          // unit vibration axis in the image plane (linear)
    double blade_width_rad = 0.0;  // 0 selects pi / blade_count (50% fill)
    double patch_half_px = 12.0;   // half side of the rendered patch (linear)

    double effective_blade_width() const;
};

struct NoiseModel {
    double radar_snr_db = 20.0;
    double pixel_noise_sigma = 2.0;
};

struct Scene {
    std::vector<SourceSpec> sources;
    int width = 320;
    int height = 240;
    double fps = 30.0;
    double wavelength_m = kSpeedOfLight / 10.5e9;
    double d0_m = 1.0;
    NoiseModel noise;
    std::uint64_t seed = 1;
    double px_per_mm = 5.0;
    double ambient_gray = 4.0;     // floor seen when nothing illuminates the scene
    double background_gray = 30.0;

    /// Throws ConfigError naming the first violated invariant.
    void validate() const;
};

/// Range closest to `nominal_m` whose round-trip phase 4 pi d / lambda is
/// pi/2 modulo 2 pi, i.e. the maximum-sensitivity point of a single-channel
/// CW mixer.
double off_null_range(double wavelength_m, double nominal_m);

/// Cycles completed by the source's oscillation (or revolutions of a rotor)
/// in [0, t], accounting for drift.
double source_cycles(const SourceSpec& source, double t);

/// Instantaneous frequency, accounting for drift.
double source_frequency(const SourceSpec& source, double t);

/// Ground-truth displacement in millimeters. Linear sources move along
/// `axis`; rotors report their center-of-mass position (x0, y0 when balanced).
Vec2 ground_truth_displacement(const SourceSpec& source, double t);

/// Rotor mechanical angle in radians.
double rotor_angle(const SourceSpec& source, double t);

/// 1 when a blade covers the radar beam line, 0 otherwise. Throws for
/// non-rotor sources.
double blade_occupancy(const SourceSpec& source, double t);

/// Mean of blade_occupancy over [t0, t1] (exact for a constant rotation rate).
double blade_occupancy_mean(const SourceSpec& source, double t0, double t1);

}  // namespace strobevib
