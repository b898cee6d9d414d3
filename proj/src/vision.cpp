#include "strobevib/vision.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "strobevib/error.hpp"

namespace strobevib {

// ---------------------------------------------------------------- flow

namespace {

// Flow between two already presmoothed frames.
FlowField flow_from_planes(const Plane& a, const Plane& b, const FlowSettings& settings) {
    const int w = a.width, h = a.height;

    Plane ix(w, h), iy(w, h), ixx(w, h), ixy(w, h), iyy(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const float gx = 0.5f * (a.at(std::min(x + 1, w - 1), y) - a.at(std::max(x - 1, 0), y));
            const float gy = 0.5f * (a.at(x, std::min(y + 1, h - 1)) - a.at(x, std::max(y - 1, 0)));
            ix.at(x, y) = gx;
            iy.at(x, y) = gy;
            ixx.at(x, y) = gx * gx;
            ixy.at(x, y) = gx * gy;
            iyy.at(x, y) = gy * gy;
        }
    }
    const int r = settings.window_radius;
    const float area = static_cast<float>((2 * r + 1) * (2 * r + 1));
    const Plane sxx = box_sum(ixx, r), sxy = box_sum(ixy, r), syy = box_sum(iyy, r);

    FlowField flow;
    flow.width = w;
    flow.height = h;
    flow.vx.assign(a.size(), 0.0f);
    flow.vy.assign(a.size(), 0.0f);
    flow.valid.assign(a.size(), 0);
    std::vector<float> inv_xx(a.size()), inv_xy(a.size()), inv_yy(a.size());
    for (std::size_t p = 0; p < a.size(); ++p) {
        const double gxx = sxx.pixels[p] / area, gxy = sxy.pixels[p] / area, gyy = syy.pixels[p] / area;
        const double tr = gxx + gyy, det = gxx * gyy - gxy * gxy;
        const double lmin = 0.5 * (tr - std::sqrt(std::max(0.0, tr * tr - 4.0 * det)));
        if (lmin >= settings.min_eigenvalue && det > 0.0) {
            flow.valid[p] = 1;
            // Inverse of the raw (window-summed) tensor.
            const double d = static_cast<double>(sxx.pixels[p]) * syy.pixels[p] -
                             static_cast<double>(sxy.pixels[p]) * sxy.pixels[p];
            inv_xx[p] = static_cast<float>(syy.pixels[p] / d);
            inv_xy[p] = static_cast<float>(-sxy.pixels[p] / d);
            inv_yy[p] = static_cast<float>(sxx.pixels[p] / d);
        }
    }

    // Only pixels inside some valid pixel's window feed the normal equations.
    Plane valid_plane(w, h);
    for (std::size_t p = 0; p < a.size(); ++p) valid_plane.pixels[p] = flow.valid[p];
    const Plane near_valid = box_sum(valid_plane, r);

    Plane ixt(w, h), iyt(w, h), wvx(w, h), wvy(w, h);
    for (int it = 0; it < std::max(1, settings.iterations); ++it) {
        // Pixels without a solvable window of their own (flat areas, straight
        // edges) are warped with the mean flow of the valid pixels around
        // them; leaving them at zero would bias their valid neighbors.
        for (std::size_t p = 0; p < a.size(); ++p) {
            wvx.pixels[p] = flow.valid[p] ? flow.vx[p] : 0.0f;
            wvy.pixels[p] = flow.valid[p] ? flow.vy[p] : 0.0f;
        }
        const Plane sum_vx = box_sum(wvx, r), sum_vy = box_sum(wvy, r);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t p = flow.index(x, y);
                if (near_valid.pixels[p] < 0.5f) continue;
                float ux = flow.vx[p], uy = flow.vy[p];
                if (!flow.valid[p]) {
                    ux = sum_vx.pixels[p] / near_valid.pixels[p];
                    uy = sum_vy.pixels[p] / near_valid.pixels[p];
                }
                const float warped = sample_bilinear(b, x + ux, y + uy);
                const float dt = warped - a.at(x, y);
                ixt.pixels[p] = ix.pixels[p] * dt;
                iyt.pixels[p] = iy.pixels[p] * dt;
            }
        }
        const Plane bx = box_sum(ixt, r), by = box_sum(iyt, r);
        const float limit = static_cast<float>(r);
        for (std::size_t p = 0; p < a.size(); ++p) {
            if (!flow.valid[p]) continue;
            const float dx = -(inv_xx[p] * bx.pixels[p] + inv_xy[p] * by.pixels[p]);
            const float dy = -(inv_xy[p] * bx.pixels[p] + inv_yy[p] * by.pixels[p]);
            flow.vx[p] = std::clamp(flow.vx[p] + dx, -limit, limit);
            flow.vy[p] = std::clamp(flow.vy[p] + dy, -limit, limit);
        }
    }
    return flow;
}

Plane presmooth(const Gray8& frame, const FlowSettings& settings) {
    return gaussian_blur(to_plane(frame), settings.presmooth_sigma);
}

}  // namespace

FlowField lucas_kanade_flow(const Gray8& frame_a, const Gray8& frame_b, const FlowSettings& settings) {
    if (!frame_a.same_size(frame_b)) throw ConfigError("frames differ in size", "frame_b");
    if (settings.window_radius < 1) throw ConfigError("must be >= 1", "window_radius");
    return flow_from_planes(presmooth(frame_a, settings), presmooth(frame_b, settings), settings);
}

std::vector<PixelPoint> foreground_mask(const Gray8& frame, const FlowField& flow, double lambda,
                                        double motion_floor) {
    if (lambda < 0.0 || lambda > 255.0) throw ConfigError("must lie in [0, 255]", "lambda");
    std::vector<PixelPoint> out;
    for (int y = 0; y < frame.height; ++y) {
        for (int x = 0; x < frame.width; ++x) {
            const std::size_t p = flow.index(x, y);
            if (frame.at(x, y) < lambda) continue;
            if (std::hypot(flow.vx[p], flow.vy[p]) >= motion_floor) out.push_back({x, y});
        }
    }
    return out;
}

// ---------------------------------------------------------------- segmentation

namespace {

void finalize_segmentation(RoiSegmentation& seg, std::span<const PixelPoint> points,
                           const std::vector<int>& assignment, int k) {
    std::vector<Vec2> sums(k);
    std::vector<int> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        sums[assignment[i]] = sums[assignment[i]] + Vec2{double(points[i].x), double(points[i].y)};
        ++counts[assignment[i]];
    }
    std::vector<int> order;
    for (int c = 0; c < k; ++c) {
        if (counts[c] > 0) order.push_back(c);
    }
    std::vector<Vec2> cent(k);
    for (int c : order) cent[c] = (1.0 / counts[c]) * sums[c];
    std::stable_sort(order.begin(), order.end(), [&](int l, int r) {
        if (cent[l].x != cent[r].x) return cent[l].x < cent[r].x;
        return cent[l].y < cent[r].y;
    });
    std::vector<int> relabel(k, 0);
    for (std::size_t i = 0; i < order.size(); ++i) relabel[order[i]] = static_cast<int>(i) + 1;

    seg.k = static_cast<int>(order.size());
    seg.label_map.assign(static_cast<std::size_t>(seg.width) * seg.height, 0);
    seg.centroids.assign(seg.k, {});
    seg.boxes.assign(seg.k, BoundingBox{std::numeric_limits<int>::max(), std::numeric_limits<int>::max(), -1, -1});
    seg.point_counts.assign(seg.k, 0);
    for (int c : order) {
        seg.centroids[relabel[c] - 1] = cent[c];
        seg.point_counts[relabel[c] - 1] = counts[c];
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
        const int label = relabel[assignment[i]];
        const auto& pt = points[i];
        if (pt.x >= 0 && pt.y >= 0 && pt.x < seg.width && pt.y < seg.height) {
            seg.label_map[static_cast<std::size_t>(pt.y) * seg.width + pt.x] = label;
        }
        auto& box = seg.boxes[label - 1];
        box.x0 = std::min(box.x0, pt.x);
        box.y0 = std::min(box.y0, pt.y);
        box.x1 = std::max(box.x1, pt.x);
        box.y1 = std::max(box.y1, pt.y);
    }
}

double dist2(Vec2 a, Vec2 b) {
    const Vec2 d = a - b;
    return d.x * d.x + d.y * d.y;
}

}  // namespace

RoiSegmentation segment_rois(std::span<const PixelPoint> input, int k, int width, int height,
                             std::uint64_t seed) {
    if (k < 1) throw ConfigError("must be >= 1", "k");
    if (input.size() < static_cast<std::size_t>(k)) {
        throw ConfigError("need at least k foreground points, got " + std::to_string(input.size()), "k");
    }
    // Sorting makes the result independent of the order points arrive in.
    std::vector<PixelPoint> points(input.begin(), input.end());
    std::sort(points.begin(), points.end());
    const std::size_t n = points.size();
    auto as_vec = [&](std::size_t i) { return Vec2{double(points[i].x), double(points[i].y)}; };

    std::mt19937_64 rng(seed);
    std::vector<Vec2> centers;
    centers.push_back(as_vec(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)));
    std::vector<double> d2(n);
    while (static_cast<int>(centers.size()) < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::numeric_limits<double>::max();
            for (const auto& c : centers) d2[i] = std::min(d2[i], dist2(as_vec(i), c));
            total += d2[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double target = std::uniform_real_distribution<double>(0.0, total)(rng);
            for (pick = 0; pick + 1 < n && target >= d2[pick]; ++pick) target -= d2[pick];
        } else {
            pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
        }
        centers.push_back(as_vec(pick));
    }

    std::vector<int> assignment(n, 0);
    for (int iter = 0; iter < 100; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            for (int c = 0; c < k; ++c) {
                const double d = dist2(as_vec(i), centers[c]);
                if (d < best) {
                    best = d;
                    assignment[i] = c;
                }
            }
        }
        std::vector<Vec2> sums(k);
        std::vector<int> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sums[assignment[i]] = sums[assignment[i]] + as_vec(i);
            ++counts[assignment[i]];
        }
        double moved = 0.0;
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            const Vec2 next = (1.0 / counts[c]) * sums[c];
            moved = std::max(moved, std::sqrt(dist2(next, centers[c])));
            centers[c] = next;
        }
        if (moved < 0.1) break;
    }

    RoiSegmentation seg;
    seg.width = width;
    seg.height = height;
    finalize_segmentation(seg, points, assignment, k);
    return seg;
}

RoiSegmentation merge_adjacent_rois(const RoiSegmentation& seg, int gap, int min_points) {
    std::vector<int> parent(seg.k);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (int i = 0; i < seg.k; ++i) {
        for (int j = i + 1; j < seg.k; ++j) {
            const auto& a = seg.boxes[i];
            const auto& b = seg.boxes[j];
            const int dx = std::max({0, b.x0 - a.x1, a.x0 - b.x1});
            const int dy = std::max({0, b.y0 - a.y1, a.y0 - b.y1});
            if (std::max(dx, dy) <= gap) parent[find(i)] = find(j);
        }
    }
    std::vector<int> group_size(seg.k, 0);
    for (int i = 0; i < seg.k; ++i) group_size[find(i)] += seg.point_counts[i];

    std::vector<PixelPoint> points;
    std::vector<int> assignment;
    for (int y = 0; y < seg.height; ++y) {
        for (int x = 0; x < seg.width; ++x) {
            const int label = seg.label_map[static_cast<std::size_t>(y) * seg.width + x];
            if (label == 0) continue;
            const int root = find(label - 1);
            if (group_size[root] < min_points) continue;
            points.push_back({x, y});
            assignment.push_back(root);
        }
    }
    RoiSegmentation out;
    out.width = seg.width;
    out.height = seg.height;
    finalize_segmentation(out, points, assignment, std::max(seg.k, 1));
    return out;
}

// ---------------------------------------------------------------- PCA

PrincipalMotion principal_motion(std::span<const Vec2> flow_vectors) {
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& v : flow_vectors) {
        sxx += v.x * v.x;
        sxy += v.x * v.y;
        syy += v.y * v.y;
    }
    const double n = std::max<std::size_t>(flow_vectors.size(), 1);
    sxx /= n;
    sxy /= n;
    syy /= n;
    PrincipalMotion pm;
    const double half_diff = 0.5 * (sxx - syy);
    const double lmax = 0.5 * (sxx + syy) + std::sqrt(half_diff * half_diff + sxy * sxy);
    if (!(lmax > 1e-12)) {
        pm.degenerate = true;
        return pm;
    }
    Vec2 e;
    if (std::abs(sxy) > 1e-15 * lmax) {
        e = {lmax - syy, sxy};
    } else {
        e = sxx >= syy ? Vec2{1.0, 0.0} : Vec2{0.0, 1.0};
    }
    const double norm = std::hypot(e.x, e.y);
    e = (1.0 / norm) * e;
    if (e.x < 0.0 || (e.x == 0.0 && e.y < 0.0)) e = -1.0 * e;
    pm.eigvec = e;
    pm.eigval = lmax;
    return pm;
}

PrincipalMotion principal_motion(const FlowField& flow, const RoiSegmentation& seg, int roi) {
    std::vector<Vec2> vectors;
    for (std::size_t p = 0; p < seg.label_map.size(); ++p) {
        if (seg.label_map[p] == roi && flow.valid[p]) vectors.push_back({flow.vx[p], flow.vy[p]});
    }
    if (vectors.size() < 8) {
        throw ConfigError("ROI " + std::to_string(roi) + " has fewer than 8 valid flow pixels", "roi");
    }
    return principal_motion(vectors);
}

// ---------------------------------------------------------------- capture analysis

CaptureFlows compute_capture_flows(const FrameSequence& frames, const VisionSettings& settings) {
    if (frames.frames.size() < 2) throw ConfigError("need at least two frames", "frames");
    CaptureFlows out;
    out.fps = frames.fps;
    std::vector<double> means;
    for (const auto& f : frames.frames) {
        double s = 0.0;
        for (auto v : f.pixels) s += v;
        means.push_back(s / std::max<std::size_t>(f.size(), 1));
    }
    const double brightest = *std::max_element(means.begin(), means.end());
    for (std::size_t i = 0; i < means.size(); ++i) {
        if (means[i] >= settings.lit_fraction * brightest) out.lit_frames.push_back(static_cast<int>(i));
    }
    if (settings.flow.window_radius < 1) throw ConfigError("must be >= 1", "window_radius");
    Plane prev;
    for (std::size_t i = 0; i < out.lit_frames.size(); ++i) {
        Plane next = presmooth(frames.frames[out.lit_frames[i]], settings.flow);
        if (i > 0) out.flows.push_back(flow_from_planes(prev, next, settings.flow));
        prev = std::move(next);
    }
    return out;
}

std::vector<PixelPoint> capture_foreground(const FrameSequence& frames, const CaptureFlows& flows,
                                           const VisionSettings& settings) {
    std::vector<PixelPoint> out;
    if (flows.flows.empty()) return out;
    const int w = flows.flows[0].width, h = flows.flows[0].height;
    std::vector<int> active(static_cast<std::size_t>(w) * h, 0);
    for (std::size_t i = 0; i < flows.flows.size(); ++i) {
        const auto& frame = frames.frames[flows.lit_frames[i]];
        const auto& flow = flows.flows[i];
        const double gap = flows.lit_frames[i + 1] - flows.lit_frames[i];
        for (const auto& pt : foreground_mask(frame, flow, settings.lambda, settings.motion_floor * gap)) {
            if (flow.valid[flow.index(pt.x, pt.y)]) ++active[flow.index(pt.x, pt.y)];
        }
    }
    const int needed = std::max(1, static_cast<int>(std::ceil(settings.active_fraction * flows.flows.size())));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (active[static_cast<std::size_t>(y) * w + x] >= needed) out.push_back({x, y});
        }
    }
    return out;
}

namespace {

// ROI support used for trajectories: each ROI's bounding box grown by the
// margin, overlaps resolved to the nearest centroid.
std::vector<int> roi_support(const RoiSegmentation& seg, int margin) {
    std::vector<int> support(static_cast<std::size_t>(seg.width) * seg.height, 0);
    for (int y = 0; y < seg.height; ++y) {
        for (int x = 0; x < seg.width; ++x) {
            double best = std::numeric_limits<double>::max();
            int label = 0;
            for (int r = 0; r < seg.k; ++r) {
                const auto& b = seg.boxes[r];
                if (x < b.x0 - margin || x > b.x1 + margin || y < b.y0 - margin || y > b.y1 + margin) continue;
                const double d = dist2({double(x), double(y)}, seg.centroids[r]);
                if (d < best) {
                    best = d;
                    label = r + 1;
                }
            }
            support[static_cast<std::size_t>(y) * seg.width + x] = label;
        }
    }
    return support;
}

}  // namespace

RoiTrajectory accumulate_trajectory(const FrameSequence& frames, const CaptureFlows& flows,
                                    const RoiSegmentation& seg, const VisionSettings& settings) {
    RoiTrajectory traj;
    traj.fps = frames.fps;
    traj.roi_count = seg.k;
    traj.kinds.assign(seg.k, MotionKind::translation);
    traj.axes.assign(seg.k, Vec2{1.0, 0.0});
    traj.radii.assign(seg.k, 0.0);
    if (flows.lit_frames.empty() || seg.k == 0) return traj;

    const auto support = roi_support(seg, settings.roi_margin_px);
    const int first = flows.lit_frames.front();
    for (int r = 1; r <= seg.k; ++r) {
        TrajectorySample s;
        s.frame = first;
        s.roi_id = r;
        traj.samples.push_back(s);
    }

    std::vector<std::vector<TrajectorySample>> per_roi(seg.k);
    std::vector<double> radius_sum(seg.k, 0.0);
    std::vector<int> radius_count(seg.k, 0);
    for (std::size_t i = 0; i < flows.flows.size(); ++i) {
        const auto& flow = flows.flows[i];
        const auto& frame = frames.frames[flows.lit_frames[i]];
        for (int r = 1; r <= seg.k; ++r) {
            std::vector<Vec2> pos, vel;
            for (int y = 0; y < flow.height; ++y) {
                for (int x = 0; x < flow.width; ++x) {
                    const std::size_t p = flow.index(x, y);
                    if (support[p] != r || !flow.valid[p] || frame.at(x, y) < settings.lambda) continue;
                    pos.push_back({double(x), double(y)});
                    vel.push_back({flow.vx[p], flow.vy[p]});
                }
            }
            TrajectorySample s;
            s.frame = flows.lit_frames[i + 1];
            s.t = (s.frame - first) / frames.fps;
            s.roi_id = r;
            if (!vel.empty()) {
                Vec2 mp, mv;
                for (std::size_t j = 0; j < vel.size(); ++j) {
                    mp = mp + pos[j];
                    mv = mv + vel[j];
                }
                mp = (1.0 / pos.size()) * mp;
                mv = (1.0 / vel.size()) * mv;
                // Rigid in-plane motion v = m + omega x (p - c): the rotation
                // rate does not depend on where the rotation center is.
                double num = 0.0, den = 0.0;
                for (std::size_t j = 0; j < vel.size(); ++j) {
                    const Vec2 d = pos[j] - mp;
                    num += d.x * vel[j].y - d.y * vel[j].x;
                    den += d.x * d.x + d.y * d.y;
                }
                s.mean_flow = mv;
                s.omega = den > 0.0 ? num / den : 0.0;
                const auto pm = principal_motion(vel);
                s.eigvec = pm.eigvec;
                s.eigval = pm.eigval;
                radius_sum[r - 1] += std::sqrt(den / vel.size());
                ++radius_count[r - 1];
            }
            per_roi[r - 1].push_back(s);
        }
    }

    for (int r = 0; r < seg.k; ++r) {
        auto& series = per_roi[r];
        const double radius = radius_count[r] ? radius_sum[r] / radius_count[r] : 0.0;
        traj.radii[r] = radius;
        double e_trans = 0.0, e_rot = 0.0;
        std::vector<Vec2> means;
        for (const auto& s : series) {
            e_trans += s.mean_flow.x * s.mean_flow.x + s.mean_flow.y * s.mean_flow.y;
            e_rot += s.omega * s.omega * radius * radius;
            means.push_back(s.mean_flow);
        }
        traj.kinds[r] = e_rot > e_trans ? MotionKind::rotation : MotionKind::translation;
        traj.axes[r] = principal_motion(means).eigvec;
        for (auto& s : series) {
            s.signed_projection = traj.kinds[r] == MotionKind::rotation
                                      ? s.omega * radius
                                      : s.mean_flow.x * traj.axes[r].x + s.mean_flow.y * traj.axes[r].y;
        }
    }
    for (std::size_t i = 0; i < flows.flows.size(); ++i) {
        for (int r = 0; r < seg.k; ++r) traj.samples.push_back(per_roi[r][i]);
    }
    return traj;
}

RoiTrajectory accumulate_trajectory(const FrameSequence& frames, const RoiSegmentation& seg,
                                    const VisionSettings& settings) {
    return accumulate_trajectory(frames, compute_capture_flows(frames, settings), seg, settings);
}

std::vector<TrajectorySample> RoiTrajectory::series(int roi_id) const {
    std::vector<TrajectorySample> out;
    for (const auto& s : samples) {
        if (s.roi_id == roi_id) out.push_back(s);
    }
    return out;
}

std::vector<double> RoiTrajectory::accumulated(int roi_id) const {
    const bool rotating = roi_id >= 1 && roi_id <= roi_count && kinds[roi_id - 1] == MotionKind::rotation;
    std::vector<double> out;
    double acc = 0.0;
    for (const auto& s : series(roi_id)) {
        acc += rotating ? s.omega : s.signed_projection;
        out.push_back(acc);
    }
    return out;
}

std::vector<Vec2> RoiTrajectory::accumulated_xy(int roi_id) const {
    std::vector<Vec2> out;
    Vec2 acc;
    for (const auto& s : series(roi_id)) {
        acc = acc + s.mean_flow;
        out.push_back(acc);
    }
    return out;
}

namespace {

// Variance of `ys` explained by c + a cos(2 pi f t) + b sin(2 pi f t).
double explained_power(std::span<const double> ts, std::span<const double> ys, double f, double& a_out,
                       double& b_out) {
    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    Eigen::Vector3d aty = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double arg = kTwoPi * f * ts[i];
        const Eigen::Vector3d row(1.0, std::cos(arg), std::sin(arg));
        ata += row * row.transpose();
        aty += row * ys[i];
    }
    const Eigen::Vector3d coef = ata.ldlt().solve(aty);
    a_out = coef[1];
    b_out = coef[2];
    double mean = 0.0;
    for (double y : ys) mean += y;
    mean /= ys.size();
    double ss_tot = 0.0, ss_res = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double arg = kTwoPi * f * ts[i];
        const double fit = coef[0] + coef[1] * std::cos(arg) + coef[2] * std::sin(arg);
        ss_tot += (ys[i] - mean) * (ys[i] - mean);
        ss_res += (ys[i] - fit) * (ys[i] - fit);
    }
    return std::max(0.0, ss_tot - ss_res);
}

double variance(std::span<const double> ys) {
    double mean = 0.0;
    for (double y : ys) mean += y;
    mean /= std::max<std::size_t>(ys.size(), 1);
    double v = 0.0;
    for (double y : ys) v += (y - mean) * (y - mean);
    return v;
}

}  // namespace

RoiFrequency roi_frequency(const RoiTrajectory& traj, int roi_id, const VisionSettings& settings) {
    if (roi_id < 1 || roi_id > traj.roi_count) throw ConfigError("unknown ROI " + std::to_string(roi_id), "roi");
    const auto series = traj.series(roi_id);
    if (series.size() < 3) throw ConfigError("trajectory too short for a frequency estimate", "trajectory");
    RoiFrequency out;
    out.kind = traj.kinds[roi_id - 1];
    std::vector<double> ts;
    for (const auto& s : series) ts.push_back(s.t);

    // Both image axes are fitted jointly: a rotor's asymmetric feature traces
    // an orbit, a linear source a line, and flow magnitude bias only scales it.
    const auto xy = traj.accumulated_xy(roi_id);
    std::vector<std::vector<double>> channels(2);
    for (const auto& p : xy) {
        channels[0].push_back(p.x);
        channels[1].push_back(p.y);
    }
    const double n = static_cast<double>(xy.size());
    out.amplitude = std::sqrt((variance(channels[0]) + variance(channels[1])) / n);
    if (out.amplitude < settings.static_px) {
        out.is_static = true;
        return out;
    }
    double total = 0.0;
    for (const auto& ch : channels) total += variance(ch);

    const double nyquist = 0.5 * traj.fps;
    double best_f = 0.0, best_p = -1.0;
    const int steps = static_cast<int>(std::floor((nyquist - settings.min_freq) / settings.freq_step + 1e-9));
    for (int i = 0; i <= steps; ++i) {
        const double f = settings.min_freq + i * settings.freq_step;
        double p = 0.0, a = 0.0, b = 0.0;
        for (const auto& ch : channels) p += explained_power(ts, ch, f, a, b);
        if (p > best_p) {
            best_p = p;
            best_f = f;
        }
    }
    out.hz = best_f;
    out.coherence = total > 0.0 ? best_p / total : 0.0;
    out.signed_hz = best_f;
    if (out.kind == MotionKind::rotation) {
        // Orbit sense in image coordinates, same convention as omega.
        double mx = 0.0, my = 0.0;
        for (const auto& p : xy) {
            mx += p.x / n;
            my += p.y / n;
        }
        double sense = 0.0;
        for (std::size_t i = 0; i + 1 < xy.size(); ++i) {
            sense += (xy[i].x - mx) * (xy[i + 1].y - xy[i].y) - (xy[i].y - my) * (xy[i + 1].x - xy[i].x);
        }
        out.sign_known = true;
        if (sense < 0.0) out.signed_hz = -best_f;
    }
    return out;
}

bool freeze_check(double residual_hz, double threshold_hz) {
    if (residual_hz < 0.0) throw ConfigError("must be non-negative", "residual");
    return residual_hz < threshold_hz;
}

namespace {

CaptureAnalysis finish_analysis(const FrameSequence& frames, const CaptureFlows& flows, RoiSegmentation seg,
                                const VisionSettings& settings) {
    CaptureAnalysis out;
    out.segmentation = std::move(seg);
    out.trajectory = accumulate_trajectory(frames, flows, out.segmentation, settings);
    for (int r = 1; r <= out.segmentation.k; ++r) {
        if (out.trajectory.series(r).size() < 3) {
            RoiFrequency none;
            none.is_static = true;
            out.rois.push_back(none);
        } else {
            out.rois.push_back(roi_frequency(out.trajectory, r, settings));
        }
    }
    return out;
}

}  // namespace

CaptureAnalysis analyze_capture(const FrameSequence& frames, int k, std::uint64_t seed,
                                const VisionSettings& settings) {
    const auto flows = compute_capture_flows(frames, settings);
    const auto points = capture_foreground(frames, flows, settings);
    RoiSegmentation seg;
    seg.width = frames.frames.front().width;
    seg.height = frames.frames.front().height;
    seg.label_map.assign(static_cast<std::size_t>(seg.width) * seg.height, 0);
    if (!points.empty() && k >= 1) {
        const int kk = std::min<int>(k, static_cast<int>(points.size()));
        seg = merge_adjacent_rois(segment_rois(points, kk, seg.width, seg.height, seed), settings.merge_gap_px,
                                  settings.min_roi_points);
    }
    return finish_analysis(frames, flows, std::move(seg), settings);
}

CaptureAnalysis analyze_capture_with_rois(const FrameSequence& frames, const RoiSegmentation& seg,
                                          const VisionSettings& settings) {
    return finish_analysis(frames, compute_capture_flows(frames, settings), seg, settings);
}

void write_trajectory_csv(const RoiTrajectory& traj, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "frame_idx,roi_id,proj_px,eigvec_x,eigvec_y\n";
    char line[128];
    for (const auto& s : traj.samples) {
        std::snprintf(line, sizeof line, "%d,%d,%.6f,%.6f,%.6f\n", s.frame, s.roi_id, s.signed_projection,
                      s.eigvec.x, s.eigvec.y);
        out << line;
    }
    if (!out) throw IoError("failed writing " + path.string());
}

void write_label_pgm(const RoiSegmentation& seg, const std::filesystem::path& path) {
    Gray8 img(seg.width, seg.height);
    for (std::size_t p = 0; p < seg.label_map.size(); ++p) {
        img.pixels[p] = static_cast<std::uint8_t>(std::min(seg.label_map[p], 255));
    }
    write_pgm(img, path);
}

}  // namespace strobevib
