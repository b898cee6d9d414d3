#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "strobevib/error.hpp"
#include "strobevib/strobe_camera.hpp"
#include "strobevib/vision.hpp"

using namespace strobevib;

namespace {

// Smooth texture evaluated at continuous coordinates so sub-pixel shifts are exact.
double texture(double x, double y) {
    return 128.0 + 45.0 * std::sin(0.31 * x + 0.5) * std::cos(0.23 * y) + 30.0 * std::sin(0.17 * (x + 2.0 * y)) +
           20.0 * std::cos(0.41 * x - 0.29 * y + 1.1);
}

// 120x100 frame with the textured patch [30, 90) x [25, 75) shifted by (sx, sy);
// the background is flat dark gray.
Gray8 patch_frame(double sx, double sy) {
    Gray8 img(120, 100, 20);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double u = x - sx, v = y - sy;
            if (u >= 30 && u < 90 && v >= 25 && v < 75) {
                img.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(texture(u, v)), 0L, 255L));
            }
        }
    }
    return img;
}

// Mean valid flow over the patch interior (inset so window effects at the
// patch border do not count).
Vec2 interior_mean(const FlowField& flow) {
    double sx = 0.0, sy = 0.0;
    int n = 0;
    for (int y = 35; y < 65; ++y) {
        for (int x = 42; x < 78; ++x) {
            const auto i = flow.index(x, y);
            if (!flow.valid[i]) continue;
            sx += flow.vx[i];
            sy += flow.vy[i];
            ++n;
        }
    }
    return n ? Vec2{sx / n, sy / n} : Vec2{};
}

std::vector<PixelPoint> blob(int cx, int cy, int r) {
    std::vector<PixelPoint> pts;
    for (int y = cy - r; y <= cy + r; ++y) {
        for (int x = cx - r; x <= cx + r; ++x) {
            if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) pts.push_back({x, y});
        }
    }
    return pts;
}

double angle_deg(Vec2 a, Vec2 b) {
    const double c = std::abs(a.x * b.x + a.y * b.y) / (std::hypot(a.x, a.y) * std::hypot(b.x, b.y));
    return std::acos(std::min(1.0, c)) * 180.0 / M_PI;
}

// One-ROI trajectory whose per-frame flow integrates to amp * sin(2 pi f t) along x.
RoiTrajectory sinusoid_trajectory(double f, double amp, double fps = 30.0, double seconds = 1.0) {
    RoiTrajectory traj;
    traj.fps = fps;
    traj.roi_count = 1;
    traj.kinds = {MotionKind::translation};
    traj.axes = {Vec2{1.0, 0.0}};
    traj.radii = {10.0};
    const int n = static_cast<int>(std::lround(fps * seconds));
    double prev = 0.0;
    for (int i = 1; i < n; ++i) {
        const double t = i / fps;
        const double x = amp * std::sin(2.0 * M_PI * f * t);
        TrajectorySample s;
        s.frame = i;
        s.t = t;
        s.roi_id = 1;
        s.mean_flow = {x - prev, 0.0};
        s.signed_projection = x - prev;
        prev = x;
        traj.samples.push_back(s);
    }
    return traj;
}

Scene speaker_scene(double f) {
    Scene scene;
    SourceSpec s;
    s.id = "a";
    s.freq_hz = f;
    s.center_px = {160, 120};
    scene.sources.push_back(s);
    return scene;
}

}  // namespace

TEST(LucasKanade, IdenticalFramesGiveZeroFlow) {
    const auto a = patch_frame(0, 0);
    const auto flow = lucas_kanade_flow(a, a);
    int valid = 0;
    for (std::size_t i = 0; i < flow.vx.size(); ++i) {
        if (!flow.valid[i]) continue;
        ++valid;
        ASSERT_EQ(flow.vx[i], 0.0f);
        ASSERT_EQ(flow.vy[i], 0.0f);
    }
    EXPECT_GT(valid, 1000);
}

TEST(LucasKanade, OnePixelShiftRight) {
    const auto flow = lucas_kanade_flow(patch_frame(0, 0), patch_frame(1, 0));
    const auto m = interior_mean(flow);
    EXPECT_NEAR(m.x, 1.0, 0.2);
    EXPECT_LE(std::abs(m.y), 0.1);
}

TEST(LucasKanade, DiagonalShiftPointsAtFortyFiveDegrees) {
    const auto m = interior_mean(lucas_kanade_flow(patch_frame(0, 0), patch_frame(1, 1)));
    EXPECT_NEAR(std::atan2(m.y, m.x) * 180.0 / M_PI, 45.0, 5.0);
}

TEST(LucasKanade, SmallShiftsAreLinear) {
    for (double s : {0.25, 0.5, 1.0}) {
        const auto m1 = interior_mean(lucas_kanade_flow(patch_frame(0, 0), patch_frame(s, 0)));
        const auto m2 = interior_mean(lucas_kanade_flow(patch_frame(0, 0), patch_frame(2 * s, 0)));
        EXPECT_NEAR(m2.x / m1.x, 2.0, 0.2) << "s " << s;
    }
}

TEST(LucasKanade, RejectsMismatchedFrames) {
    EXPECT_THROW(lucas_kanade_flow(Gray8(10, 10), Gray8(11, 10)), ConfigError);
    FlowSettings bad;
    bad.window_radius = 0;
    EXPECT_THROW(lucas_kanade_flow(Gray8(10, 10), Gray8(10, 10), bad), ConfigError);
}

TEST(ForegroundMask, DarkOrStaticPixelsAreExcluded) {
    const Gray8 dark(60, 40, 10);
    EXPECT_TRUE(foreground_mask(dark, lucas_kanade_flow(dark, dark), 60.0, 0.3).empty());
    const auto bright = patch_frame(0, 0);
    EXPECT_TRUE(foreground_mask(bright, lucas_kanade_flow(bright, bright), 60.0, 0.3).empty());
}

TEST(ForegroundMask, MovingBrightBlobIsIncluded) {
    const auto a = patch_frame(0, 0), b = patch_frame(2, 0);
    const auto pts = foreground_mask(a, lucas_kanade_flow(a, b), 60.0, 0.5);
    std::vector<char> hit(a.size(), 0);
    for (const auto& p : pts) hit[static_cast<std::size_t>(p.y) * a.width + p.x] = 1;
    int inside = 0, bright = 0;
    for (int y = 35; y < 65; ++y) {
        for (int x = 42; x < 78; ++x) {
            if (a.at(x, y) < 60) continue;
            ++bright;
            inside += hit[static_cast<std::size_t>(y) * a.width + x];
        }
    }
    EXPECT_GE(inside, 0.9 * bright);
    for (const auto& p : pts) EXPECT_GE(a.at(p.x, p.y), 60);
}

TEST(Segmentation, TwoDistantBlobsSplitCleanly) {
    auto pts = blob(50, 100, 15);
    const auto right = blob(250, 100, 15);
    const std::size_t left_count = pts.size();
    pts.insert(pts.end(), right.begin(), right.end());
    const auto seg = segment_rois(pts, 2, 320, 240, 1);
    ASSERT_EQ(seg.k, 2);
    // Labels are numbered left to right.
    EXPECT_LT(seg.centroids[0].x, seg.centroids[1].x);
    int pure_left = 0, pure_right = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const int label = seg.label_map[pts[i].y * 320 + pts[i].x];
        if (i < left_count && label == 1) ++pure_left;
        if (i >= left_count && label == 2) ++pure_right;
    }
    EXPECT_GE(pure_left, 0.95 * left_count);
    EXPECT_GE(pure_right, 0.95 * (pts.size() - left_count));
}

TEST(Segmentation, SingleBlobSingleCluster) {
    const auto pts = blob(100, 80, 12);
    const auto seg = segment_rois(pts, 1, 200, 160);
    ASSERT_EQ(seg.k, 1);
    EXPECT_EQ(seg.point_counts[0], static_cast<int>(pts.size()));
    EXPECT_NEAR(seg.centroids[0].x, 100.0, 1e-9);
    EXPECT_NEAR(seg.centroids[0].y, 80.0, 1e-9);
}

TEST(Segmentation, TooFewPointsIsAnError) {
    const std::vector<PixelPoint> pts{{1, 1}};
    EXPECT_THROW(segment_rois(pts, 2, 10, 10), ConfigError);
    EXPECT_THROW(segment_rois(pts, 0, 10, 10), ConfigError);
}

TEST(Segmentation, DeterministicAndOrderInvariant) {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> x(0, 299), y(0, 199);
    std::vector<PixelPoint> pts;
    for (int i = 0; i < 600; ++i) pts.push_back({x(rng), y(rng)});
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    const auto a = segment_rois(pts, 3, 300, 200, 5);
    const auto b = segment_rois(pts, 3, 300, 200, 5);
    EXPECT_EQ(a.label_map, b.label_map);
    auto shuffled = pts;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_EQ(segment_rois(shuffled, 3, 300, 200, 5).label_map, a.label_map);
}

TEST(Segmentation, MergeJoinsTouchingClustersAndDropsSpecks) {
    auto pts = blob(50, 50, 10);
    const auto near = blob(72, 50, 10);
    pts.insert(pts.end(), near.begin(), near.end());
    const auto far = blob(200, 50, 10);
    pts.insert(pts.end(), far.begin(), far.end());
    const auto seg = segment_rois(pts, 3, 260, 100, 1);
    ASSERT_EQ(seg.k, 3);
    const auto merged = merge_adjacent_rois(seg, 6, 20);
    EXPECT_EQ(merged.k, 2);
    const auto pruned = merge_adjacent_rois(seg, 0, 1000);
    EXPECT_EQ(pruned.k, 0);
}

TEST(PrincipalMotion, AxisAlignedAndDiagonalFlows) {
    std::vector<Vec2> h{{1, 0}, {-2, 0}, {0.5, 0}, {3, 0}};
    const auto ph = principal_motion(h);
    EXPECT_NEAR(std::abs(ph.eigvec.x), 1.0, 1e-12);
    EXPECT_NEAR(ph.eigvec.y, 0.0, 1e-12);
    std::vector<Vec2> d{{1, 1}, {-2, -2}, {0.3, 0.3}, {4, 4}};
    const auto pd = principal_motion(d);
    EXPECT_NEAR(std::abs(pd.eigvec.x), std::sqrt(0.5), 1e-12);
    EXPECT_NEAR(std::abs(pd.eigvec.y), std::sqrt(0.5), 1e-12);
    EXPECT_GT(pd.eigvec.x * pd.eigvec.y, 0.0);
}

TEST(PrincipalMotion, DegenerateFlowIsFlagged) {
    std::vector<Vec2> z(10, Vec2{});
    const auto p = principal_motion(z);
    EXPECT_TRUE(p.degenerate);
    EXPECT_EQ(p.eigval, 0.0);
    EXPECT_EQ(p.eigvec, (Vec2{1.0, 0.0}));
}

TEST(PrincipalMotion, NoisyHorizontalMotionWithinFiveDegrees) {
    int pass = 0;
    for (int seed = 1; seed <= 50; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> amp(0.0, 1.0), noise(0.0, 0.1);
        std::vector<Vec2> v;
        for (int i = 0; i < 200; ++i) v.push_back({amp(rng) + noise(rng), noise(rng)});
        if (angle_deg(principal_motion(v).eigvec, {1.0, 0.0}) <= 5.0) ++pass;
    }
    EXPECT_GE(pass, 48);
}

TEST(PrincipalMotion, ScaleInvariant) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<Vec2> v;
    for (int i = 0; i < 100; ++i) v.push_back({n(rng) + 0.5 * n(rng), 0.3 * n(rng)});
    const auto base = principal_motion(v);
    for (double c : {1e-3, 0.5, 7.0, 1e4}) {
        std::vector<Vec2> s;
        for (const auto& p : v) s.push_back(c * p);
        const auto e = principal_motion(s).eigvec;
        EXPECT_NEAR(std::abs(e.x * base.eigvec.x + e.y * base.eigvec.y), 1.0, 1e-6) << c;
    }
}

TEST(PrincipalMotion, FlowFieldOverloadNeedsEnoughPixels) {
    FlowField flow;
    flow.width = 4;
    flow.height = 4;
    flow.vx.assign(16, 1.0f);
    flow.vy.assign(16, 0.0f);
    flow.valid.assign(16, 1);
    RoiSegmentation seg;
    seg.width = 4;
    seg.height = 4;
    seg.k = 1;
    seg.label_map.assign(16, 0);
    seg.label_map[0] = seg.label_map[1] = 1;
    EXPECT_THROW(principal_motion(flow, seg, 1), ConfigError);
    seg.label_map.assign(16, 1);
    EXPECT_NEAR(std::abs(principal_motion(flow, seg, 1).eigvec.x), 1.0, 1e-12);
}

TEST(RoiFrequency, FlatTrajectoryIsStatic) {
    const auto f = roi_frequency(sinusoid_trajectory(1.0, 0.0), 1);
    EXPECT_TRUE(f.is_static);
    EXPECT_EQ(f.hz, 0.0);
}

TEST(RoiFrequency, SlowSinusoidsWithinOneOverDuration) {
    for (double f : {0.9, 0.75, 3.2, 11.0}) {
        const auto r = roi_frequency(sinusoid_trajectory(f, 3.0), 1);
        EXPECT_FALSE(r.is_static);
        EXPECT_NEAR(r.hz, f, 1.0) << f;
        EXPECT_GT(r.coherence, 0.9);
    }
}

TEST(RoiFrequency, RejectsUnknownRoi) {
    const auto traj = sinusoid_trajectory(1.0, 1.0);
    EXPECT_THROW(roi_frequency(traj, 2, {}), ConfigError);
}

TEST(FreezeCheck, ThresholdAtOneHertz) {
    EXPECT_TRUE(freeze_check(0.0));
    EXPECT_TRUE(freeze_check(0.75));
    EXPECT_FALSE(freeze_check(1.5));
    EXPECT_THROW(freeze_check(-0.1), ConfigError);
}

TEST(Trajectory, LockedStrobeGivesFlatTrajectory) {
    const auto scene = speaker_scene(113.0);
    StrobeSchedule sch;
    sch.freq = 113.0;
    const auto seq = render_frames(scene, sch, 1.0);
    // Nothing moves, so segment a fixed box around the source.
    RoiSegmentation seg;
    seg.width = scene.width;
    seg.height = scene.height;
    seg.k = 1;
    seg.label_map.assign(static_cast<std::size_t>(scene.width) * scene.height, 0);
    for (int y = 100; y < 140; ++y) {
        for (int x = 140; x < 180; ++x) seg.label_map[y * scene.width + x] = 1;
    }
    seg.centroids = {Vec2{160, 120}};
    seg.boxes = {BoundingBox{140, 100, 179, 139}};
    seg.point_counts = {1600};
    const auto traj = accumulate_trajectory(seq, seg);
    // Flashes clipped at frame boundaries and sensor noise jitter the box
    // mean by a fraction of a pixel, but nothing accumulates.
    for (const auto& s : traj.samples) EXPECT_LT(std::abs(s.signed_projection), 0.3);
    for (double x : traj.accumulated(1)) EXPECT_LT(std::abs(x), 0.5);
    EXPECT_TRUE(roi_frequency(traj, 1).is_static);
}

TEST(Trajectory, ApparentMotionTracesSinusoid) {
    const auto scene = speaker_scene(113.0);
    StrobeSchedule sch;
    sch.freq = 112.25;
    const auto an = analyze_capture(render_frames(scene, sch, 1.0), 1, 1);
    ASSERT_EQ(an.rois.size(), 1u);
    EXPECT_NEAR(an.rois[0].hz, 0.75, 1.0);
    EXPECT_GT(an.rois[0].coherence, 0.8);
    // Peak-to-peak displacement close to the 2 mm stroke at 5 px/mm.
    const auto acc = an.trajectory.accumulated(1);
    const auto [lo, hi] = std::minmax_element(acc.begin(), acc.end());
    EXPECT_GT(*hi - *lo, 5.0);
}

TEST(Trajectory, WobblingRotorMovesInHorizontalView) {
    Scene scene;
    scene.px_per_mm = 2.0;
    for (int i = 0; i < 2; ++i) {
        SourceSpec s;
        s.id = i ? "right" : "left";
        s.kind = SourceKind::rotor;
        s.blade_count = 3;
        s.freq_hz = 30.0;
        s.amplitude_mm = 15.0;
        s.center_px = {80.0 + 160.0 * i, 120.0};
        s.wobble = i ? Wobble{} : Wobble{2.0, 1.0, 5.0, 0.0, 0.0};
        scene.sources.push_back(s);
    }
    StrobeSchedule sch;
    sch.freq = 30.0;
    RenderOptions opts;
    opts.view = CameraView::horizontal;
    const auto seq = render_frames(scene, sch, 1.0, 0.0, opts);
    RoiSegmentation seg;
    seg.width = scene.width;
    seg.height = scene.height;
    seg.k = 2;
    seg.label_map.assign(static_cast<std::size_t>(scene.width) * scene.height, 0);
    for (int y = 80; y < 160; ++y) {
        for (int x = 30; x < 130; ++x) seg.label_map[y * scene.width + x] = 1;
        for (int x = 190; x < 290; ++x) seg.label_map[y * scene.width + x] = 2;
    }
    seg.centroids = {Vec2{80, 120}, Vec2{240, 120}};
    seg.boxes = {BoundingBox{30, 80, 129, 159}, BoundingBox{190, 80, 289, 159}};
    seg.point_counts = {8000, 8000};
    const auto traj = accumulate_trajectory(seq, seg);
    double left = 0.0, right = 0.0;
    for (const auto& p : traj.accumulated_xy(1)) left = std::max(left, std::abs(p.x));
    for (const auto& p : traj.accumulated_xy(2)) right = std::max(right, std::abs(p.x));
    EXPECT_GT(left, 2.0);   // 2 mm at 2 px/mm peaks near 4 px
    EXPECT_LT(right, 0.5);
}
