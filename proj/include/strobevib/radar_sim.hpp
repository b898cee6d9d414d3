#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "strobevib/scene.hpp"

namespace strobevib {

/// Sampled single-channel CW mixer output.
struct DopplerTrace {
    std::vector<double> samples;
    double sample_rate = 0.0;
    double duration = 0.0;
    double start_time = 0.0;
    std::uint64_t seed = 0;
};

inline constexpr double kDefaultRadarSampleRate = 4000.0;
inline constexpr double kDefaultRadarOnTime = 10.0;

/// Highest baseband component the scene can produce: blade-pass rate M f for
/// rotors, the (peak drifted) vibration frequency for linear sources.
double highest_doppler_component(const Scene& scene);

/// Sum of per-source mixer contributions plus white Gaussian noise at
/// scene.noise.radar_snr_db. Linear sources phase-modulate the carrier by
/// 4 pi w(t) / lambda; rotors switch the path length between 2 d0 and
/// 2 (d0 + d1) as blades cross the beam, with d1 = lambda / 8.
DopplerTrace synthesize_doppler(const Scene& scene, double duration, double sample_rate,
                                double start_time = 0.0);

/// `time_s,amplitude` CSV plus a JSON sidecar at `<csv>.json`.
void write_trace_csv(const DopplerTrace& trace, const std::filesystem::path& csv_path);
DopplerTrace read_trace_csv(const std::filesystem::path& csv_path);

}  // namespace strobevib
