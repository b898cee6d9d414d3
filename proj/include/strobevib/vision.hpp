#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "strobevib/image.hpp"
#include "strobevib/scene.hpp"
#include "strobevib/strobe_camera.hpp"

namespace strobevib {

/// Dense per-pixel velocities in pixels per frame pair. `valid` is 0 where
/// the local structure tensor was too ill-conditioned to solve.
struct FlowField {
    int width = 0;
    int height = 0;
    std::vector<float> vx;
    std::vector<float> vy;
    std::vector<std::uint8_t> valid;

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

struct FlowSettings {
    int window_radius = 7;
    double min_eigenvalue = 1e-4;  // on the window-averaged tensor of [0,1] intensities
    int iterations = 4;            // Gauss-Newton refinements with warping of the second frame
    float presmooth_sigma = 1.0f;
};

struct PixelPoint {
    int x = 0;
    int y = 0;
    friend auto operator<=>(const PixelPoint&, const PixelPoint&) = default;
};

struct BoundingBox {
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1;
    bool empty() const { return x1 < x0 || y1 < y0; }
};

struct RoiSegmentation {
    int width = 0;
    int height = 0;
    std::vector<int> label_map;  // 0 = background, 1..k
    int k = 0;
    std::vector<Vec2> centroids;       // index label-1
    std::vector<BoundingBox> boxes;    // index label-1
    std::vector<int> point_counts;     // index label-1
};

struct PrincipalMotion {
    Vec2 eigvec{1.0, 0.0};
    double eigval = 0.0;
    bool degenerate = false;
};

enum class MotionKind { translation, rotation };

struct TrajectorySample {
    int frame = 0;
    double t = 0.0;  // seconds since the first frame
    int roi_id = 0;
    Vec2 eigvec{1.0, 0.0};
    double eigval = 0.0;
    double signed_projection = 0.0;  // px moved since the previous sample
    Vec2 mean_flow;
    double omega = 0.0;  // rad moved since the previous sample
};

struct RoiTrajectory {
    std::vector<TrajectorySample> samples;
    double fps = 0.0;
    int roi_count = 0;
    std::vector<MotionKind> kinds;  // index roi_id-1
    std::vector<Vec2> axes;         // translation axis per ROI
    std::vector<double> radii;      // RMS radius of the ROI's flow support, px

    /// Time-ordered samples for one ROI.
    std::vector<TrajectorySample> series(int roi_id) const;
    /// Displacement since the first frame (px, along the ROI axis) or
    /// accumulated rotation (rad) for rotating ROIs.
    std::vector<double> accumulated(int roi_id) const;
    /// Accumulated flow components (px) since the first frame.
    std::vector<Vec2> accumulated_xy(int roi_id) const;
};

struct RoiFrequency {
    double hz = 0.0;
    double signed_hz = 0.0;  // rotation sense for rotating ROIs; equals hz otherwise
    bool is_static = false;
    bool sign_known = false;
    double coherence = 0.0;  // fraction of trajectory variance explained by the fitted sinusoid
    double amplitude = 0.0;  // RMS motion, px
    MotionKind kind = MotionKind::translation;
};

struct VisionSettings {
    FlowSettings flow;
    double lambda = 60.0;
    double motion_floor = 0.3;
    double active_fraction = 0.2;  // of frame pairs a pixel must move in to count as foreground
    int roi_margin_px = 6;
    int merge_gap_px = 6;
    int min_roi_points = 20;
    double static_px = 0.3;
    double freq_step = 0.01;
    double min_freq = 0.05;
    double lit_fraction = 0.5;  // frames darker than this fraction of the brightest are unlit
};

FlowField lucas_kanade_flow(const Gray8& frame_a, const Gray8& frame_b, const FlowSettings& settings = {});

/// Pixels with brightness >= lambda and flow magnitude >= motion_floor.
std::vector<PixelPoint> foreground_mask(const Gray8& frame, const FlowField& flow, double lambda,
                                        double motion_floor);

/// K-means on pixel coordinates with k-means++ seeding; labels are numbered
/// left to right by centroid x.
RoiSegmentation segment_rois(std::span<const PixelPoint> points, int k, int width, int height,
                             std::uint64_t seed = 1);

/// Merges clusters whose bounding boxes lie within `gap` px of each other and
/// drops clusters with fewer than `min_points` points, then renumbers.
RoiSegmentation merge_adjacent_rois(const RoiSegmentation& seg, int gap, int min_points);

/// Dominant eigenvector of the flow scatter matrix sum v v^T over the ROI.
PrincipalMotion principal_motion(const FlowField& flow, const RoiSegmentation& seg, int roi);
PrincipalMotion principal_motion(std::span<const Vec2> flow_vectors);

/// Flow for every consecutive pair of lit frames; unlit frames are skipped.
struct CaptureFlows {
    std::vector<int> lit_frames;
    std::vector<FlowField> flows;  // flows[i] maps lit_frames[i] -> lit_frames[i+1]
    double fps = 0.0;
};
CaptureFlows compute_capture_flows(const FrameSequence& frames, const VisionSettings& settings = {});

/// Foreground points accumulated across a capture.
std::vector<PixelPoint> capture_foreground(const FrameSequence& frames, const CaptureFlows& flows,
                                           const VisionSettings& settings = {});

RoiTrajectory accumulate_trajectory(const FrameSequence& frames, const RoiSegmentation& seg,
                                    const VisionSettings& settings = {});
RoiTrajectory accumulate_trajectory(const FrameSequence& frames, const CaptureFlows& flows,
                                    const RoiSegmentation& seg, const VisionSettings& settings = {});

/// Dominant non-DC frequency of an ROI trajectory in [0, fps/2], found with a
/// least-squares (floating mean) periodogram so records shorter than one
/// cycle are still resolved.
RoiFrequency roi_frequency(const RoiTrajectory& traj, int roi_id, const VisionSettings& settings = {});

bool freeze_check(double residual_hz, double threshold_hz = 1.0);

/// Everything the controller needs from one capture.
struct CaptureAnalysis {
    RoiSegmentation segmentation;
    RoiTrajectory trajectory;
    std::vector<RoiFrequency> rois;  // index roi_id-1
};
CaptureAnalysis analyze_capture(const FrameSequence& frames, int k, std::uint64_t seed,
                                const VisionSettings& settings = {});
CaptureAnalysis analyze_capture_with_rois(const FrameSequence& frames, const RoiSegmentation& seg,
                                          const VisionSettings& settings = {});

/// `frame_idx,roi_id,proj_px,eigvec_x,eigvec_y`
void write_trajectory_csv(const RoiTrajectory& traj, const std::filesystem::path& path);
/// Labels as gray values.
void write_label_pgm(const RoiSegmentation& seg, const std::filesystem::path& path);

}  // namespace strobevib
