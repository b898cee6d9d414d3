#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <vector>

#include "strobevib/radar_sim.hpp"

namespace strobevib {

enum class Window { rect, hann };

/// One-sided amplitude spectrum. Bin k sits at k * resolution.
struct Spectrum {
    std::vector<double> bin_freqs;
    std::vector<double> magnitudes;
    double resolution = 0.0;

    std::size_t size() const { return magnitudes.size(); }
};

struct Peak {
    double freq = 0.0;
    double magnitude = 0.0;
};

/// Ordered by descending magnitude.
struct PeakList {
    std::vector<Peak> peaks;
};

struct PeakSettings {
    double threshold_rel = 0.2;
    double min_separation_hz = 5.0;
    int max_peaks = 8;
    double min_freq_hz = 1.0;  // bins below this (DC leakage) are never peaks
};

struct Residue {
    std::uint64_t remainder = 0;
    std::uint64_t modulus = 1;
};

/// Amplitude spectrum of `samples` taken at `sample_rate`, zero padded to
/// `fft_size` (0 selects the next power of two >= samples.size()). A pure
/// tone of amplitude a shows up with magnitude ~a.
Spectrum power_spectrum(std::span<const double> samples, double sample_rate,
                        Window window = Window::hann, std::size_t fft_size = 0);
Spectrum power_spectrum(const DopplerTrace& trace, Window window = Window::hann);

/// Local maxima (DC excluded) above threshold_rel * max, chosen greedily by
/// magnitude so that no two are closer than min_separation_hz. Peak
/// frequencies are refined by parabolic interpolation of the magnitude.
PeakList detect_peaks(const Spectrum& spec, const PeakSettings& settings = {});

/// {peak / M : peak, M}, ascending, merged when closer than `tolerance_hz`.
std::vector<double> candidate_frequencies(const PeakList& peaks, const std::set<int>& blade_hypotheses,
                                          double tolerance_hz);

/// Smallest non-negative x with x = r_i (mod m_i) for pairwise coprime m_i.
std::uint64_t crt_reconstruct(std::span<const Residue> residues);

/// Frequency band [low, high] around `center_hz` holding `fraction` of the
/// spectral energy found within +-half_window_hz, trimmed symmetrically from
/// both tails.
struct Band {
    double low = 0.0;
    double high = 0.0;
    double width() const { return high - low; }
};
Band occupied_band(const Spectrum& spec, double center_hz, double half_window_hz, double fraction);

/// `freq_hz,magnitude` CSV.
void write_spectrum_csv(const Spectrum& spec, const std::filesystem::path& path);

std::size_t next_pow2(std::size_t n);

}  // namespace strobevib
