#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "strobevib/scene.hpp"
#include "strobevib/vision.hpp"

namespace strobevib {

/// Time-ordered orbit of one ROI in millimeters, zero-mean and free of
/// linear drift.
struct WobbleTrajectory {
    std::vector<double> t;
    std::vector<Vec2> points;
    int roi_id = 0;
    double fps = 0.0;

    double rms_radius() const;
    /// Copy scaled to unit RMS radius (unchanged if the radius is zero).
    WobbleTrajectory normalized() const;
};

struct FusionResult {
    std::vector<WobbleTrajectory> orbits;
    std::vector<std::string> warnings;
};

/// Pairs the horizontal view's x motion with the vertical view's y motion per
/// ROI. `roi_matching` maps horizontal ROI ids to vertical ROI ids.
FusionResult fuse_dual_view(const RoiTrajectory& horizontal, const RoiTrajectory& vertical,
                            const std::map<int, int>& roi_matching, double px_per_mm);

/// Mean distance from each measured point to the reference polyline (closed),
/// divided by the reference RMS radius, in percent.
double trajectory_error(const WobbleTrajectory& measured, const WobbleTrajectory& reference);

enum class Balance { balanced, imbalanced };

struct ImbalanceFit {
    Balance balance = Balance::balanced;
    double amp_x = 0.0;
    double amp_y = 0.0;
    double freq_hz = 0.0;
};

/// Fits x = a cos(2 pi f t) + b sin(2 pi f t) (and likewise y) at the dominant
/// orbit frequency; balanced iff both fitted semi-axes are below the
/// threshold (same units as the trajectory).
ImbalanceFit classify_imbalance(const WobbleTrajectory& traj, double radius_threshold);

/// Model orbit (the wobble ellipse) of a scene source sampled at `samples` points over one period,
/// zero-mean, in millimeters.
WobbleTrajectory reference_orbit(const SourceSpec& source, int samples = 720);

struct WobbleConfig {
    double strobe_hz = 0.0;  // 0 selects the frequency of the first rotor
    double capture_s = 1.0;
    double duty = 0.10;
    double localization_detune = 0.5;
    double radius_threshold_mm = 0.5;
    int roi_count = 0;  // 0 selects the number of sources
    VisionSettings vision;

    void validate() const;
};

struct WobbleRoiResult {
    int roi_id = 0;
    Vec2 centroid;
    std::string source_id;  // scene source nearest to the ROI
    WobbleTrajectory orbit;
    ImbalanceFit fit;
    std::optional<double> error_pct;  // vs the model orbit; absent for balanced sources
};

struct WobbleReport {
    std::uint64_t seed = 0;
    double strobe_hz = 0.0;
    std::vector<WobbleRoiResult> rois;
    std::vector<std::string> warnings;
};

/// Localizes ROIs with a slightly detuned capture, then captures the
/// horizontal and vertical views with the strobe locked to the rotation.
WobbleReport run_wobble(const Scene& scene, const WobbleConfig& cfg);

/// `t,x,y,roi_id`
void write_orbit_csv(const WobbleTrajectory& traj, const std::filesystem::path& path);
void write_wobble_json(const WobbleReport& report, const std::filesystem::path& path);

}  // namespace strobevib
