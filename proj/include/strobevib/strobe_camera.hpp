#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "strobevib/image.hpp"
#include "strobevib/scene.hpp"

namespace strobevib {

struct StrobeSchedule {
    double freq = 0.0;
    double duty = 0.10;
    double phase = 0.0;  // radians of the strobe period
    bool enabled = true;

    void validate() const;
};

/// Which displacement components a camera can see. The wobble rig uses a
/// horizontal camera (sees x) and a vertical camera (sees y).
enum class CameraView { front, horizontal, vertical };

struct RenderOptions {
    int pulse_samples = 8;       // scene evaluations across each strobe pulse
    int ambient_substeps = 64;   // uniform evaluations per frame with the strobe off
    CameraView view = CameraView::front;
    bool add_noise = true;
};

struct FrameSequence {
    std::vector<Gray8> frames;
    double fps = 0.0;
    double capture_duration = 0.0;
    double start_time = 0.0;
    StrobeSchedule schedule;
    std::uint64_t seed = 0;
    std::vector<int> lit_samples;     // illuminated scene evaluations per frame
    std::vector<double> blur_energy;  // mean per-pixel radiance variance across a frame's samples
};

/// Renders round(fps * capture_duration) frames starting at `start_time`.
/// A frame averages the scene radiance over the instants its exposure window
/// was lit: inside each strobe pulse when the strobe is enabled, uniformly
/// across the whole window otherwise. Frames that catch no pulse show only
/// the ambient floor.
FrameSequence render_frames(const Scene& scene, const StrobeSchedule& schedule, double capture_duration,
                            double start_time = 0.0, const RenderOptions& options = {});

/// Closed-form apparent frequency of a periodic motion at f_true under a
/// strobe at f_strobe seen by a camera at fps: distance to the nearest
/// strobe harmonic, folded into [0, fps/2].
double apparent_frequency(double f_true, double f_strobe, double fps);

/// Writes frame_0000.pgm, ... plus frames.json (fps, schedule, seed).
void write_frame_sequence(const FrameSequence& seq, const std::filesystem::path& dir);

}  // namespace strobevib
