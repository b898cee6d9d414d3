#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>

#include "strobevib/error.hpp"
#include "strobevib/radar_sim.hpp"
#include "strobevib/spectral.hpp"

using namespace strobevib;

namespace {

Scene base_scene(double snr_db = 20.0) {
    Scene s;
    s.d0_m = off_null_range(s.wavelength_m, 1.0);
    s.noise.radar_snr_db = snr_db;
    return s;
}

SourceSpec linear(const std::string& id, double f) {
    SourceSpec s;
    s.id = id;
    s.freq_hz = f;
    s.center_px = {100, 100};
    return s;
}

SourceSpec rotor(double f, int blades) {
    SourceSpec s;
    s.id = "rotor";
    s.kind = SourceKind::rotor;
    s.freq_hz = f;
    s.blade_count = blades;
    s.center_px = {100, 100};
    return s;
}

// Frequency of the strongest bin at or above 1 Hz.
double dominant(const Spectrum& spec) {
    std::size_t best = 1;
    for (std::size_t k = 1; k < spec.size(); ++k) {
        if (spec.bin_freqs[k] < 1.0) continue;
        if (spec.bin_freqs[best] < 1.0 || spec.magnitudes[k] > spec.magnitudes[best]) best = k;
    }
    return spec.bin_freqs[best];
}

}  // namespace

TEST(Doppler, StaticSceneHasOnlyDcAndNoise) {
    auto scene = base_scene();
    scene.sources.push_back(linear("a", 0.0));
    const auto spec = power_spectrum(synthesize_doppler(scene, 10.0, 4000.0));
    double top = 0.0;
    for (std::size_t k = 0; k < spec.size(); ++k) {
        if (spec.bin_freqs[k] >= 1.0) top = std::max(top, spec.magnitudes[k]);
    }
    // A 1 mm source would put ~0.4 in its bin; the noise floor sits near 1e-3.
    EXPECT_LT(top, 0.02);

    auto quiet = base_scene(300.0);
    quiet.sources.push_back(linear("a", 0.0));
    const auto clean = power_spectrum(synthesize_doppler(quiet, 2.0, 4000.0));
    for (std::size_t k = 1; k < clean.size(); ++k) {
        if (clean.bin_freqs[k] >= 1.0) ASSERT_LT(clean.magnitudes[k], 1e-9);
    }
}

TEST(Doppler, TenBladeRotorPeaksAtFourHundredHz) {
    auto scene = base_scene();
    scene.sources.push_back(rotor(40.0, 10));
    const auto spec = power_spectrum(synthesize_doppler(scene, kDefaultRadarOnTime, kDefaultRadarSampleRate));
    EXPECT_NEAR(dominant(spec), 400.0, spec.resolution);
}

TEST(Doppler, TwoSpeakersGiveTwoDominantPeaks) {
    auto scene = base_scene();
    scene.sources.push_back(linear("left", 113.0));
    scene.sources.push_back(linear("right", 141.0));
    const auto spec = power_spectrum(synthesize_doppler(scene, kDefaultRadarOnTime, kDefaultRadarSampleRate));
    PeakSettings settings;
    settings.max_peaks = 2;
    auto peaks = detect_peaks(spec, settings).peaks;
    ASSERT_EQ(peaks.size(), 2u);
    std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.freq < b.freq; });
    EXPECT_NEAR(peaks[0].freq, 113.0, spec.resolution);
    EXPECT_NEAR(peaks[1].freq, 141.0, spec.resolution);
}

TEST(Doppler, SuperpositionMatchesPeakUnionOfSingleSources) {
    auto one = base_scene(300.0);
    one.sources.push_back(linear("left", 113.0));
    auto two = base_scene(300.0);
    two.sources.push_back(linear("right", 141.0));
    auto both = base_scene();
    both.sources = {one.sources[0], two.sources[0]};

    const auto s1 = power_spectrum(synthesize_doppler(one, 4.0, 4000.0));
    const auto s2 = power_spectrum(synthesize_doppler(two, 4.0, 4000.0));
    const auto s12 = power_spectrum(synthesize_doppler(both, 4.0, 4000.0));

    // Noise statistics from a band free of source harmonics.
    double mean = 0.0, sq = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < s12.size(); ++k) {
        if (s12.bin_freqs[k] < 1850.0 || s12.bin_freqs[k] > 1950.0) continue;
        mean += s12.magnitudes[k];
        sq += s12.magnitudes[k] * s12.magnitudes[k];
        ++n;
    }
    mean /= n;
    const double sigma = std::sqrt(std::max(0.0, sq / n - mean * mean));
    const double tol = mean + 3.0 * sigma;

    for (const auto* single : {&s1, &s2}) {
        for (const auto& p : detect_peaks(*single).peaks) {
            const auto k = static_cast<std::size_t>(std::lround(p.freq / single->resolution));
            const double expected = std::max(s1.magnitudes[k], s2.magnitudes[k]);
            EXPECT_NEAR(s12.magnitudes[k], expected, tol) << "at " << p.freq << " Hz";
        }
    }
}

TEST(Doppler, RotorFundamentalIsBladeCountTimesRate) {
    for (int m = 1; m <= 12; ++m) {
        for (double f : {5.0, 23.0, 40.0, 97.0, 160.0, 400.0}) {
            auto scene = base_scene(300.0);
            scene.sources.push_back(rotor(f, m));
            const double rate = std::max(4000.0, 8.0 * m * f);
            const auto spec = power_spectrum(synthesize_doppler(scene, 2.0, rate));
            EXPECT_NEAR(dominant(spec), m * f, spec.resolution) << "M " << m << " f " << f;
        }
    }
}

TEST(Doppler, IdenticalSeedsGiveIdenticalTraces) {
    auto scene = base_scene();
    scene.sources.push_back(linear("left", 113.0));
    scene.sources.push_back(rotor(40.0, 10));
    scene.seed = 42;
    const auto a = synthesize_doppler(scene, 1.0, 4000.0);
    const auto b = synthesize_doppler(scene, 1.0, 4000.0);
    ASSERT_EQ(a.samples.size(), b.samples.size());
    EXPECT_EQ(0, std::memcmp(a.samples.data(), b.samples.data(), a.samples.size() * sizeof(double)));
    scene.seed = 43;
    EXPECT_NE(synthesize_doppler(scene, 1.0, 4000.0).samples, a.samples);
}

TEST(Doppler, SourceOrderDoesNotMatter) {
    auto scene = base_scene();
    scene.sources.push_back(linear("left", 113.0));
    scene.sources.push_back(linear("right", 141.0));
    const auto a = synthesize_doppler(scene, 0.5, 4000.0);
    std::swap(scene.sources[0], scene.sources[1]);
    EXPECT_EQ(synthesize_doppler(scene, 0.5, 4000.0).samples, a.samples);
}

TEST(Doppler, NoiseLevelFollowsSnr) {
    auto scene = base_scene(20.0);
    scene.sources.push_back(linear("left", 113.0));
    auto clean = scene;
    clean.noise.radar_snr_db = 300.0;
    const auto noisy = synthesize_doppler(scene, 10.0, 4000.0);
    const auto ref = synthesize_doppler(clean, 10.0, 4000.0);
    double signal = 0.0, mean = 0.0, noise = 0.0;
    for (double v : ref.samples) mean += v / ref.samples.size();
    for (std::size_t i = 0; i < ref.samples.size(); ++i) {
        signal += (ref.samples[i] - mean) * (ref.samples[i] - mean);
        noise += (noisy.samples[i] - ref.samples[i]) * (noisy.samples[i] - ref.samples[i]);
    }
    EXPECT_NEAR(10.0 * std::log10(signal / noise), 20.0, 0.2);
}

TEST(Doppler, RejectsBadArguments) {
    auto scene = base_scene();
    scene.sources.push_back(rotor(300.0, 10));  // 3 kHz fundamental
    EXPECT_THROW(synthesize_doppler(scene, 1.0, 4000.0), ConfigError);
    EXPECT_THROW(synthesize_doppler(scene, 0.0, 8000.0), ConfigError);
    EXPECT_DOUBLE_EQ(highest_doppler_component(scene), 3000.0);
}

TEST(Doppler, CsvRoundTrip) {
    auto scene = base_scene();
    scene.sources.push_back(linear("left", 113.0));
    const auto trace = synthesize_doppler(scene, 0.25, 4000.0);
    const auto path = std::filesystem::temp_directory_path() / "strobevib_trace_test.csv";
    write_trace_csv(trace, path);
    const auto back = read_trace_csv(path);
    ASSERT_EQ(back.samples.size(), trace.samples.size());
    EXPECT_DOUBLE_EQ(back.sample_rate, trace.sample_rate);
    EXPECT_EQ(back.seed, trace.seed);
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        ASSERT_NEAR(back.samples[i], trace.samples[i], 1e-11 * std::max(1.0, std::abs(trace.samples[i])));
    }
    std::filesystem::remove(path);
    std::filesystem::remove(path.string() + ".json");
}
