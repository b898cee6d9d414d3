#include "strobevib/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fftw3.h>

#include "strobevib/error.hpp"

namespace strobevib {

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

Spectrum power_spectrum(std::span<const double> samples, double sample_rate, Window window,
                        std::size_t fft_size) {
    if (samples.empty()) throw ConfigError("cannot take the spectrum of an empty trace", "trace");
    if (!(sample_rate > 0.0)) throw ConfigError("sample rate must be positive", "sample_rate");
    const std::size_t n = samples.size();
    const std::size_t nfft = fft_size == 0 ? next_pow2(n) : std::max(fft_size, n);

    double* in = fftw_alloc_real(nfft);
    fftw_complex* out = fftw_alloc_complex(nfft / 2 + 1);
    // FFTW_ESTIMATE never times candidate algorithms, so plans are reproducible.
    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(nfft), in, out, FFTW_ESTIMATE);

    double gain = 0.0;
    for (std::size_t i = 0; i < nfft; ++i) {
        if (i < n) {
            const double w = window == Window::hann && n > 1
                                 ? 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) / (n - 1))
                                 : 1.0;
            in[i] = samples[i] * w;
            gain += w;
        } else {
            in[i] = 0.0;
        }
    }
    fftw_execute(plan);

    Spectrum spec;
    spec.resolution = sample_rate / static_cast<double>(nfft);
    const std::size_t bins = nfft / 2 + 1;
    spec.bin_freqs.resize(bins);
    spec.magnitudes.resize(bins);
    for (std::size_t k = 0; k < bins; ++k) {
        spec.bin_freqs[k] = static_cast<double>(k) * spec.resolution;
        const double mag = std::hypot(out[k][0], out[k][1]) / gain;
        spec.magnitudes[k] = (k == 0 || 2 * k == nfft) ? mag : 2.0 * mag;
    }
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
    return spec;
}

Spectrum power_spectrum(const DopplerTrace& trace, Window window) {
    return power_spectrum(trace.samples, trace.sample_rate, window);
}

PeakList detect_peaks(const Spectrum& spec, const PeakSettings& settings) {
    if (!(settings.threshold_rel > 0.0 && settings.threshold_rel <= 1.0)) {
        throw ConfigError("must lie in (0, 1]", "threshold_rel");
    }
    PeakList result;
    const auto& m = spec.magnitudes;
    if (m.size() < 3) return result;
    std::size_t first = 1;
    while (first + 1 < m.size() && first * spec.resolution < settings.min_freq_hz) ++first;
    const double top = *std::max_element(m.begin() + first, m.end());
    if (!(top > 0.0)) return result;
    const double floor = settings.threshold_rel * top;

    std::vector<Peak> local;
    for (std::size_t k = first; k + 1 < m.size(); ++k) {
        if (m[k] < floor || !(m[k] > m[k - 1]) || m[k] < m[k + 1]) continue;
        double offset = 0.0;
        const double denom = m[k - 1] - 2.0 * m[k] + m[k + 1];
        if (denom < 0.0) offset = std::clamp(0.5 * (m[k - 1] - m[k + 1]) / denom, -0.5, 0.5);
        local.push_back({(static_cast<double>(k) + offset) * spec.resolution, m[k]});
    }
    std::stable_sort(local.begin(), local.end(),
                     [](const Peak& a, const Peak& b) { return a.magnitude > b.magnitude; });
    for (const Peak& p : local) {
        if (static_cast<int>(result.peaks.size()) >= settings.max_peaks) break;
        const bool clear = std::all_of(result.peaks.begin(), result.peaks.end(), [&](const Peak& q) {
            return std::abs(q.freq - p.freq) >= settings.min_separation_hz;
        });
        if (clear) result.peaks.push_back(p);
    }
    return result;
}

std::vector<double> candidate_frequencies(const PeakList& peaks, const std::set<int>& blade_hypotheses,
                                          double tolerance_hz) {
    if (blade_hypotheses.empty()) throw ConfigError("must not be empty", "blade_hypotheses");
    if (*blade_hypotheses.begin() < 1) throw ConfigError("blade counts must be >= 1", "blade_hypotheses");
    std::vector<double> all;
    for (const auto& p : peaks.peaks) {
        for (int m : blade_hypotheses) all.push_back(p.freq / m);
    }
    std::sort(all.begin(), all.end());
    std::vector<double> out;
    for (double f : all) {
        if (out.empty() || f - out.back() > tolerance_hz) out.push_back(f);
    }
    return out;
}

std::uint64_t crt_reconstruct(std::span<const Residue> residues) {
    if (residues.empty()) throw ConfigError("need at least one congruence", "residues");
    for (std::size_t i = 0; i < residues.size(); ++i) {
        if (residues[i].modulus == 0) throw ConfigError("modulus must be positive", "residues");
        if (residues[i].remainder >= residues[i].modulus) {
            throw ConfigError("remainder " + std::to_string(residues[i].remainder) +
                                  " is inconsistent with modulus " + std::to_string(residues[i].modulus),
                              "residues");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (std::gcd(residues[i].modulus, residues[j].modulus) != 1) {
                throw ConfigError("moduli " + std::to_string(residues[j].modulus) + " and " +
                                      std::to_string(residues[i].modulus) + " are not coprime",
                                  "residues");
            }
        }
    }
    // Incremental (Garner-style) combination: x = x + M * t with
    // t = (r - x) * M^-1 (mod m).
    unsigned __int128 x = residues[0].remainder;
    unsigned __int128 big_m = residues[0].modulus;
    for (std::size_t i = 1; i < residues.size(); ++i) {
        const auto m = static_cast<unsigned __int128>(residues[i].modulus);
        const auto r = static_cast<unsigned __int128>(residues[i].remainder);
        // Modular inverse of big_m mod m by extended Euclid on signed values.
        __int128 a = static_cast<__int128>(big_m % m), b = static_cast<__int128>(m);
        __int128 u = 1, v = 0;
        while (b != 0) {
            const __int128 q = a / b;
            a -= q * b;
            std::swap(a, b);
            u -= q * v;
            std::swap(u, v);
        }
        const auto inv = static_cast<unsigned __int128>(((u % static_cast<__int128>(m)) + m) % m);
        const unsigned __int128 diff = (r + m - x % m) % m;
        const unsigned __int128 t = (diff * inv) % m;
        x += big_m * t;
        big_m *= m;
    }
    return static_cast<std::uint64_t>(x % big_m);
}

Band occupied_band(const Spectrum& spec, double center_hz, double half_window_hz, double fraction) {
    const double res = spec.resolution;
    const auto lo = static_cast<std::size_t>(std::max(1.0, std::floor((center_hz - half_window_hz) / res)));
    const auto hi = std::min(spec.size() - 1,
                             static_cast<std::size_t>(std::ceil((center_hz + half_window_hz) / res)));
    if (hi <= lo) return {center_hz, center_hz};
    std::vector<double> cumulative;
    double total = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) {
        total += spec.magnitudes[k] * spec.magnitudes[k];
        cumulative.push_back(total);
    }
    if (total <= 0.0) return {center_hz, center_hz};
    const double tail = 0.5 * (1.0 - fraction) * total;
    std::size_t a = 0;
    while (a < cumulative.size() && cumulative[a] < tail) ++a;
    std::size_t b = cumulative.size() - 1;
    while (b > 0 && cumulative[b - 1] > total - tail) --b;
    return {spec.bin_freqs[lo + a], spec.bin_freqs[lo + b]};
}

void write_spectrum_csv(const Spectrum& spec, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "freq_hz,magnitude\n";
    char line[80];
    for (std::size_t k = 0; k < spec.size(); ++k) {
        std::snprintf(line, sizeof line, "%.6f,%.12g\n", spec.bin_freqs[k], spec.magnitudes[k]);
        out << line;
    }
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace strobevib
