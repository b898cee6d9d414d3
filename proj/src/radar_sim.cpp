#include "strobevib/radar_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "strobevib/error.hpp"

namespace strobevib {

namespace {

constexpr std::uint64_t kRadarStream = 0x52414441'52000000ULL;

double round_trip_phase(const Scene& scene, const SourceSpec& s) {
    const double range = s.range_m > 0.0 ? s.range_m : scene.d0_m;
    return 4.0 * kPi * range / scene.wavelength_m;
}

void add_linear(const Scene& scene, const SourceSpec& s, const DopplerTrace& trace,
                std::vector<double>& out) {
    const double theta0 = round_trip_phase(scene, s);
    const double k = 4.0 * kPi * s.amplitude_mm * 1e-3 / scene.wavelength_m;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double t = trace.start_time + static_cast<double>(i) / trace.sample_rate;
        const double w = std::sin(kTwoPi * source_cycles(s, t) + s.phase_rad);
        out[i] += s.reflectivity * std::cos(theta0 + k * w);
    }
}

void add_rotor(const Scene& scene, const SourceSpec& s, const DopplerTrace& trace,
               std::vector<double>& out) {
    const double theta0 = round_trip_phase(scene, s);
    const double recess_phase = 4.0 * kPi * (scene.wavelength_m / 8.0) / scene.wavelength_m;
    const double dt = 1.0 / trace.sample_rate;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double t = trace.start_time + static_cast<double>(i) * dt;
        // Box-averaged over the sample interval so blade-edge harmonics above
        // Nyquist do not fold back into the band.
        const double occ = blade_occupancy_mean(s, t, t + dt);
        out[i] += s.reflectivity * std::cos(theta0 + recess_phase * (1.0 - occ));
    }
}

}  // namespace

double highest_doppler_component(const Scene& scene) {
    double top = 0.0;
    for (const auto& s : scene.sources) {
        double f = s.freq_hz;
        if (s.drift) f = std::max(f, s.drift->end_freq_hz);
        if (s.kind == SourceKind::rotor) f *= s.blade_count;
        top = std::max(top, f);
    }
    return top;
}

DopplerTrace synthesize_doppler(const Scene& scene, double duration, double sample_rate,
                                double start_time) {
    if (!(duration > 0.0)) throw ConfigError("radar duration must be positive", "duration");
    if (!(sample_rate > 2.0 * highest_doppler_component(scene))) {
        throw ConfigError("sample rate is below the Nyquist rate of the fastest source",
                          "sample_rate");
    }
    DopplerTrace trace;
    trace.sample_rate = sample_rate;
    trace.duration = duration;
    trace.start_time = start_time;
    trace.seed = scene.seed;
    const auto n = static_cast<std::size_t>(std::llround(sample_rate * duration));
    std::vector<double> clean(n, 0.0);

    // Sources are summed in id order so the result does not depend on the
    // order they were listed in.
    std::vector<const SourceSpec*> ordered;
    for (const auto& s : scene.sources) ordered.push_back(&s);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const SourceSpec* a, const SourceSpec* b) { return a->id < b->id; });
    for (const SourceSpec* s : ordered) {
        if (s->kind == SourceKind::rotor) {
            add_rotor(scene, *s, trace, clean);
        } else {
            add_linear(scene, *s, trace, clean);
        }
    }

    double mean = 0.0;
    for (double v : clean) mean += v;
    mean /= std::max<std::size_t>(n, 1);
    double power = 0.0;
    for (double v : clean) power += (v - mean) * (v - mean);
    power /= std::max<std::size_t>(n, 1);
    if (power <= 1e-12) power = 0.5;  // unit-amplitude tone as the reference level

    const double sigma = std::sqrt(power / std::pow(10.0, scene.noise.radar_snr_db / 10.0));
    std::mt19937_64 rng(scene.seed ^ kRadarStream);
    std::normal_distribution<double> noise(0.0, sigma);
    trace.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) trace.samples[i] = clean[i] + noise(rng);
    return trace;
}

void write_trace_csv(const DopplerTrace& trace, const std::filesystem::path& csv_path) {
    std::ofstream out(csv_path);
    if (!out) throw IoError("cannot write " + csv_path.string());
    out << "time_s,amplitude\n";
    char line[96];
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        const double t = trace.start_time + static_cast<double>(i) / trace.sample_rate;
        std::snprintf(line, sizeof line, "%.9f,%.12g\n", t, trace.samples[i]);
        out << line;
    }
    nlohmann::json meta{{"sample_rate", trace.sample_rate},
                        {"duration", trace.duration},
                        {"start_time", trace.start_time},
                        {"seed", trace.seed},
                        {"samples", trace.samples.size()}};
    std::ofstream side(csv_path.string() + ".json");
    side << meta.dump(2) << "\n";
    if (!out || !side) throw IoError("failed writing " + csv_path.string());
}

DopplerTrace read_trace_csv(const std::filesystem::path& csv_path) {
    std::ifstream side(csv_path.string() + ".json");
    std::ifstream in(csv_path);
    if (!in || !side) throw IoError("cannot read " + csv_path.string());
    DopplerTrace trace;
    try {
        const auto meta = nlohmann::json::parse(side);
        trace.sample_rate = meta.at("sample_rate").get<double>();
        trace.duration = meta.at("duration").get<double>();
        trace.start_time = meta.value("start_time", 0.0);
        trace.seed = meta.value("seed", std::uint64_t{0});
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(e.what(), csv_path.string() + ".json");
    }
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        if (comma == std::string::npos) continue;
        trace.samples.push_back(std::stod(line.substr(comma + 1)));
    }
    return trace;
}

}  // namespace strobevib
