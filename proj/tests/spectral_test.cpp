#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "strobevib/error.hpp"
#include "strobevib/spectral.hpp"

using namespace strobevib;

namespace {

std::vector<double> tones(const std::vector<std::pair<double, double>>& parts, double rate, double seconds,
                          double noise_sigma = 0.0, std::uint64_t seed = 1) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);
    std::vector<double> out(static_cast<std::size_t>(std::llround(rate * seconds)));
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double t = static_cast<double>(i) / rate;
        for (const auto& [f, a] : parts) out[i] += a * std::sin(2.0 * M_PI * f * t);
        if (noise_sigma > 0.0) out[i] += noise(rng);
    }
    return out;
}

std::vector<double> sorted_freqs(const PeakList& list) {
    std::vector<double> f;
    for (const auto& p : list.peaks) f.push_back(p.freq);
    std::sort(f.begin(), f.end());
    return f;
}

// Naive DFT magnitude at bin k, scaled like power_spectrum with a rect window.
double naive_bin(const std::vector<double>& x, std::size_t k) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double arg = -2.0 * M_PI * static_cast<double>(k * i) / static_cast<double>(x.size());
        re += x[i] * std::cos(arg);
        im += x[i] * std::sin(arg);
    }
    return 2.0 * std::hypot(re, im) / static_cast<double>(x.size());
}

}  // namespace

TEST(PowerSpectrum, PureToneGivesSingleDominantPeak) {
    const auto x = tones({{100.0, 1.0}}, 4000.0, 10.0);
    const auto spec = power_spectrum(x, 4000.0);
    const auto peaks = detect_peaks(spec);
    ASSERT_EQ(peaks.peaks.size(), 1u);
    EXPECT_NEAR(peaks.peaks[0].freq, 100.0, 0.1);
    EXPECT_NEAR(peaks.peaks[0].magnitude, 1.0, 0.1);
}

TEST(PowerSpectrum, ZerosGiveZeros) {
    const std::vector<double> x(1000, 0.0);
    const auto spec = power_spectrum(x, 1000.0);
    for (double m : spec.magnitudes) EXPECT_EQ(m, 0.0);
    EXPECT_TRUE(detect_peaks(spec).peaks.empty());
}

TEST(PowerSpectrum, MatchesNaiveDft) {
    const auto x = tones({{13.0, 0.7}, {40.5, 0.2}}, 256.0, 1.0, 0.05, 3);
    const auto spec = power_spectrum(x, 256.0, Window::rect);
    ASSERT_EQ(spec.size(), 129u);
    EXPECT_DOUBLE_EQ(spec.resolution, 1.0);
    for (std::size_t k = 1; k < 128; ++k) EXPECT_NEAR(spec.magnitudes[k], naive_bin(x, k), 1e-9) << k;
}

TEST(PowerSpectrum, ZeroPadsToNextPowerOfTwo) {
    const auto x = tones({{100.0, 1.0}}, 4000.0, 10.0);
    const auto spec = power_spectrum(x, 4000.0);
    EXPECT_EQ(next_pow2(40000), 65536u);
    EXPECT_NEAR(spec.resolution, 4000.0 / 65536.0, 1e-12);
    EXPECT_LE(spec.resolution, 0.1);
    EXPECT_THROW(power_spectrum(std::vector<double>{}, 10.0), ConfigError);
}

TEST(DetectPeaks, FindsThePairOfSpeakerTones) {
    const auto x = tones({{112.2, 1.0}, {140.4, 0.8}}, 4000.0, 10.0);
    const auto spec = power_spectrum(x, 4000.0);
    const auto f = sorted_freqs(detect_peaks(spec));
    ASSERT_EQ(f.size(), 2u);
    EXPECT_NEAR(f[0], 112.2, spec.resolution);
    EXPECT_NEAR(f[1], 140.4, spec.resolution);
}

TEST(DetectPeaks, FindsTheTwoRotorPeaks) {
    const auto x = tones({{93.0, 1.0}, {246.0, 0.6}}, 4000.0, 10.0);
    const auto spec = power_spectrum(x, 4000.0);
    const auto f = sorted_freqs(detect_peaks(spec));
    ASSERT_EQ(f.size(), 2u);
    EXPECT_NEAR(f[0], 93.0, spec.resolution);
    EXPECT_NEAR(f[1], 246.0, spec.resolution);
}

TEST(DetectPeaks, GreedyRuleKeepsOnlyTheLargerOfCloseMaxima) {
    Spectrum spec;
    spec.resolution = 1.0;
    spec.magnitudes.assign(40, 0.0);
    for (std::size_t k = 0; k < 40; ++k) spec.bin_freqs.push_back(static_cast<double>(k));
    // Two local maxima with a single bin between them.
    spec.magnitudes[10] = 1.0;
    spec.magnitudes[11] = 0.4;
    spec.magnitudes[12] = 0.8;
    PeakSettings settings;
    settings.min_separation_hz = 3.0;
    const auto peaks = detect_peaks(spec, settings).peaks;
    ASSERT_EQ(peaks.size(), 1u);
    EXPECT_NEAR(peaks[0].freq, 10.0, 0.5);
    EXPECT_DOUBLE_EQ(peaks[0].magnitude, 1.0);

    settings.min_separation_hz = 1.5;
    EXPECT_EQ(detect_peaks(spec, settings).peaks.size(), 2u);
}

TEST(DetectPeaks, IgnoresLowFrequencyLeakage) {
    Spectrum spec;
    spec.resolution = 0.1;
    spec.magnitudes.assign(100, 0.0);
    for (std::size_t k = 0; k < 100; ++k) spec.bin_freqs.push_back(0.1 * k);
    spec.magnitudes[3] = 5.0;   // 0.3 Hz
    spec.magnitudes[50] = 1.0;  // 5 Hz
    const auto peaks = detect_peaks(spec).peaks;
    ASSERT_EQ(peaks.size(), 1u);
    EXPECT_NEAR(peaks[0].freq, 5.0, 0.05);
}

TEST(DetectPeaks, NoisyTonesLandWithinOneBin) {
    // SNR 10 dB: tone power a^2/2 = 0.5, noise variance 0.05.
    int pass = 0;
    const int runs = 50;
    for (int seed = 1; seed <= runs; ++seed) {
        const double f0 = 50.0 + 7.3 * seed;
        const auto x = tones({{f0, 1.0}}, 4000.0, 2.0, std::sqrt(0.05), seed);
        const auto spec = power_spectrum(x, 4000.0);
        const auto peaks = detect_peaks(spec).peaks;
        if (!peaks.empty() && std::abs(peaks[0].freq - f0) <= spec.resolution) ++pass;
    }
    EXPECT_GE(pass, 48);  // 95% of 50
}

TEST(Candidates, RotorPeaksWithThreeOrFourBlades) {
    PeakList peaks{{{93.0, 1.0}, {246.0, 0.5}}};
    const auto c = candidate_frequencies(peaks, {3, 4}, 0.01);
    const std::vector<double> expected{23.25, 31.0, 61.5, 82.0};
    ASSERT_EQ(c.size(), expected.size());
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c[i], expected[i], 1e-12);
}

TEST(Candidates, PumpPeakWithTenBlades) {
    PeakList peaks{{{408.23, 1.0}}};
    const auto c = candidate_frequencies(peaks, {10}, 0.01);
    ASSERT_EQ(c.size(), 1u);
    EXPECT_NEAR(c[0], 40.823, 1e-12);
}

TEST(Candidates, EmptyPeaksGiveEmptyList) {
    EXPECT_TRUE(candidate_frequencies(PeakList{}, {1}, 0.1).empty());
    EXPECT_THROW(candidate_frequencies(PeakList{}, {}, 0.1), ConfigError);
    EXPECT_THROW(candidate_frequencies(PeakList{}, {0, 2}, 0.1), ConfigError);
}

TEST(Candidates, CloseCandidatesMerge) {
    PeakList peaks{{{60.0, 1.0}, {90.02, 1.0}}};
    // 60/2 = 30 and 90.02/3 = 30.0067 fall within the tolerance.
    const auto c = candidate_frequencies(peaks, {2, 3}, 0.05);
    EXPECT_EQ(c.size(), 3u);
}

TEST(Candidates, AddingAPeakNeverRemovesCandidates) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> freq(5.0, 500.0);
    for (int trial = 0; trial < 200; ++trial) {
        PeakList peaks;
        for (int i = 0; i < 3; ++i) peaks.peaks.push_back({freq(rng), 1.0});
        const auto before = candidate_frequencies(peaks, {1, 3, 4}, 1e-9);
        peaks.peaks.push_back({freq(rng), 1.0});
        const auto after = candidate_frequencies(peaks, {1, 3, 4}, 1e-9);
        for (double f : before) {
            const bool kept = std::any_of(after.begin(), after.end(), [&](double g) { return std::abs(f - g) <= 1e-9; });
            ASSERT_TRUE(kept) << f;
        }
    }
}

TEST(Crt, SmallExamples) {
    const std::vector<Residue> a{{2, 3}, {3, 5}};
    EXPECT_EQ(crt_reconstruct(a), 8u);
    const std::vector<Residue> b{{0, 3}, {0, 5}};
    EXPECT_EQ(crt_reconstruct(b), 0u);
    const std::vector<Residue> c{{1, 2}, {2, 3}, {3, 5}};
    EXPECT_EQ(crt_reconstruct(c), 23u);
}

TEST(Crt, ExhaustiveForThreeFiveSeven) {
    for (std::uint64_t x = 0; x < 105; ++x) {
        const std::vector<Residue> r{{x % 3, 3}, {x % 5, 5}, {x % 7, 7}};
        ASSERT_EQ(crt_reconstruct(r), x);
    }
}

TEST(Crt, MatchesBruteForceScan) {
    const std::vector<std::vector<std::uint64_t>> sets{{29, 31}, {4, 9, 25}, {8, 15, 7, 11}};
    std::mt19937_64 rng(5);
    for (const auto& moduli : sets) {
        std::uint64_t product = 1;
        for (auto m : moduli) product *= m;
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<Residue> r;
            for (auto m : moduli) r.push_back({rng() % m, m});
            std::uint64_t brute = 0;
            for (; brute < product; ++brute) {
                bool ok = true;
                for (const auto& res : r) ok = ok && brute % res.modulus == res.remainder;
                if (ok) break;
            }
            ASSERT_EQ(crt_reconstruct(r), brute);
        }
    }
}

TEST(Crt, RejectsInvalidSystems) {
    EXPECT_THROW(crt_reconstruct(std::vector<Residue>{}), ConfigError);
    EXPECT_THROW(crt_reconstruct(std::vector<Residue>{{1, 4}, {1, 6}}), ConfigError);
    EXPECT_THROW(crt_reconstruct(std::vector<Residue>{{5, 5}}), ConfigError);
    EXPECT_THROW(crt_reconstruct(std::vector<Residue>{{0, 0}}), ConfigError);
}

TEST(Crt, LargeModuliDoNotOverflow) {
    const std::uint64_t p = 4294967291ULL, q = 4294967279ULL;  // primes below 2^32
    const std::uint64_t x = 12345678901234567ULL;
    EXPECT_EQ(crt_reconstruct(std::vector<Residue>{{x % p, p}, {x % q, q}}), x);
}

TEST(OccupiedBand, StableToneIsNarrowChirpIsWide) {
    const double rate = 4000.0, seconds = 10.0;
    const auto stable = power_spectrum(tones({{100.0, 1.0}}, rate, seconds), rate);
    const auto narrow = occupied_band(stable, 100.0, 10.0, 0.95);
    EXPECT_LT(narrow.width(), 0.5);
    EXPECT_LE(narrow.low, 100.0);
    EXPECT_GE(narrow.high, 100.0 - stable.resolution);

    // Linear chirp 100 -> 105 Hz. A rect window keeps its energy spread evenly
    // over the sweep; a Hann taper would concentrate it mid-sweep.
    std::vector<double> chirp(static_cast<std::size_t>(rate * seconds));
    for (std::size_t i = 0; i < chirp.size(); ++i) {
        const double t = i / rate;
        chirp[i] = std::sin(2.0 * M_PI * (100.0 * t + 0.25 * t * t));
    }
    const auto band = occupied_band(power_spectrum(chirp, rate, Window::rect), 102.5, 10.0, 0.95);
    EXPECT_NEAR(band.low, 100.0, 0.5);
    EXPECT_NEAR(band.high, 105.0, 0.5);
}
