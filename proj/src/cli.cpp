#include "strobevib/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "strobevib/controller.hpp"
#include "strobevib/error.hpp"
#include "strobevib/metrics.hpp"
#include "strobevib/radar_sim.hpp"
#include "strobevib/scenario_io.hpp"
#include "strobevib/strobe_camera.hpp"
#include "strobevib/wobble.hpp"

namespace strobevib {

namespace fs = std::filesystem;

namespace {

template <typename F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << '\n';
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        err << "I/O error: " << e.what() << '\n';
        return kExitIo;
    }
}

ScenarioFile resolve_scenario(const CliOptions& opts) {
    ScenarioFile f;
    if (!opts.scenario.empty()) {
        f = load_scenario(opts.scenario);
    } else if (!opts.preset.empty()) {
        f = preset_scenario(opts.preset);
    } else {
        throw ConfigError("give --scenario PATH or --preset NAME", "scenario");
    }
    if (!opts.seeds.empty()) f.seeds = opts.seeds;
    if (!opts.mode.empty()) f.mode = opts.mode;
    f.validate();
    return f;
}

fs::path output_root(const CliOptions& opts, const ScenarioFile& f) {
    if (!opts.out.empty()) return opts.out;
    if (!f.output_dir.empty()) return f.output_dir;
    if (const char* env = std::getenv("STROBEVIB_OUT"); env && *env) return env;
    return "out";
}

fs::path make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError("cannot create " + dir.string() + (ec ? ": " + ec.message() : std::string()));
    }
    return dir;
}

void write_json(const nlohmann::ordered_json& j, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

void write_text(const std::string& text, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

std::string seed_dir(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

CameraView view_from_name(const std::string& name) {
    if (name == "horizontal") return CameraView::horizontal;
    if (name == "vertical") return CameraView::vertical;
    return CameraView::front;
}

std::string format(const char* fmt, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, a);
    return buf;
}

DetectionReport run_mode(const std::string& mode, const Scene& scene, const ControllerConfig& cfg) {
    if (mode == "proposed") return run_rf_assisted_strobe(scene, cfg);
    if (mode == "rf_only") return run_rf_only(scene, cfg);
    if (mode == "strobe_linear") return run_strobe_only(scene, StrobeOnlyMethod::linear_scan, cfg);
    if (mode == "strobe_crt") return run_strobe_only(scene, StrobeOnlyMethod::crt, cfg);
    throw ConfigError("unknown mode \"" + mode + "\"", "mode");
}

}  // namespace

int cmd_simulate(const CliOptions& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const ScenarioFile f = resolve_scenario(opts);
        const fs::path root = make_dir(output_root(opts, f) / "simulate");
        write_json(to_json(f), root / "scenario.json");
        for (const auto seed : f.seeds) {
            Scene scene = f.scene;
            scene.seed = seed;
            const fs::path dir = make_dir(root / seed_dir(seed));
            if (opts.verbose) err << "simulate: seed " << seed << '\n';
            const auto trace = synthesize_doppler(scene, f.simulate.radar_duration_s, f.simulate.radar_sample_rate);
            write_trace_csv(trace, dir / "trace.csv");
            StrobeSchedule schedule;
            schedule.duty = f.simulate.duty;
            schedule.freq = f.simulate.strobe_hz;
            schedule.enabled = f.simulate.strobe_hz > 0.0;
            for (const auto& view : f.views) {
                RenderOptions options;
                options.view = view_from_name(view);
                const auto frames = render_frames(scene, schedule, f.simulate.capture_s, 0.0, options);
                write_frame_sequence(frames, dir / ("frames_" + view));
            }
            out << "seed " << seed << ": " << trace.samples.size() << " radar samples, " << f.views.size()
                << " view(s) written to " << dir.generic_string() << '\n';
        }
        return static_cast<int>(kExitOk);
    });
}

int cmd_detect(const CliOptions& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const ScenarioFile f = resolve_scenario(opts);
        const fs::path root = make_dir(output_root(opts, f) / f.mode);
        write_json(to_json(f), root / "scenario.json");
        std::vector<DetectionReport> reports;
        bool all_resolved = true;
        for (const auto seed : f.seeds) {
            Scene scene = f.scene;
            scene.seed = seed;
            if (opts.verbose) err << f.mode << ": seed " << seed << '\n';
            auto report = run_mode(f.mode, scene, f.controller);
            write_report_json(report, root / (seed_dir(seed) + ".json"));
            out << "seed " << seed << ':';
            for (const auto& s : report.sources) {
                out << ' ' << format("%.3f", s.detected_freq) << " Hz";
                if (s.roi_id > 0) out << " (roi " << s.roi_id << ')';
            }
            if (report.unresolved > 0) out << ", " << report.unresolved << " unresolved";
            for (const auto& a : report.alarms) {
                out << ", " << a.kind << " alarm [" << format("%.2f", a.band_low) << ", "
                    << format("%.2f", a.band_high) << "] Hz";
            }
            out << ", consumed " << format("%.1f", report.timing.total_consumed_s) << " s\n";
            all_resolved = all_resolved && report.all_resolved();
            reports.push_back(std::move(report));
        }
        const auto stats = summarize_runs(f.mode, f.scene, reports);
        write_json(to_json(stats), root / "run_stats.json");
        out << f.mode << ": error " << format("%.4f", stats.detection_error_mean) << " % over " << stats.n_runs
            << " run(s), accuracy " << format("%.4f", stats.measurement_accuracy) << " %\n";
        return static_cast<int>(all_resolved ? kExitOk : kExitUnresolved);
    });
}

int cmd_wobble(const CliOptions& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const ScenarioFile f = resolve_scenario(opts);
        if (!f.dual_view()) {
            throw ConfigError("wobble needs both \"horizontal\" and \"vertical\" views", "views");
        }
        const fs::path root = make_dir(output_root(opts, f) / "wobble");
        write_json(to_json(f), root / "scenario.json");
        for (const auto seed : f.seeds) {
            Scene scene = f.scene;
            scene.seed = seed;
            if (opts.verbose) err << "wobble: seed " << seed << '\n';
            const auto report = run_wobble(scene, f.wobble);
            const fs::path dir = make_dir(root / seed_dir(seed));
            write_wobble_json(report, dir / "wobble.json");
            for (const auto& r : report.rois) {
                write_orbit_csv(r.orbit, dir / ("orbit_roi" + std::to_string(r.roi_id) + ".csv"));
                out << "seed " << seed << ": roi " << r.roi_id << " (" << r.source_id << ") "
                    << (r.fit.balance == Balance::balanced ? "balanced" : "imbalanced") << ", A_x "
                    << format("%.3f", r.fit.amp_x) << " mm, A_y " << format("%.3f", r.fit.amp_y) << " mm, "
                    << format("%.3f", r.fit.freq_hz) << " Hz";
                if (r.error_pct) out << ", orbit error " << format("%.2f", *r.error_pct) << " %";
                out << '\n';
            }
            for (const auto& w : report.warnings) err << "warning: " << w << '\n';
        }
        return static_cast<int>(kExitOk);
    });
}

int cmd_report(const CliOptions& opts, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (opts.runs_dir.empty()) throw ConfigError("give the runs directory", "runs_dir");
        if (!fs::is_directory(opts.runs_dir)) throw IoError("not a directory: " + opts.runs_dir.string());
        std::vector<fs::path> files;
        for (const auto& entry : fs::recursive_directory_iterator(opts.runs_dir)) {
            if (entry.is_regular_file() && entry.path().filename() == "run_stats.json") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) throw ConfigError("no run_stats.json under " + opts.runs_dir.string(), "runs_dir");
        std::map<std::string, RunStats> runs;
        for (const auto& path : files) {
            std::ifstream in(path, std::ios::binary);
            if (!in) throw IoError("cannot read " + path.string());
            RunStats stats;
            try {
                stats = run_stats_from_json(nlohmann::json::parse(in));
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError(path.string(), std::string("malformed JSON: ") + e.what(), "");
            } catch (const ConfigError& e) {
                throw ConfigError(path.string(), e.what(), "");
            }
            if (opts.verbose) err << "report: " << path.generic_string() << " (" << stats.modality << ")\n";
            if (!runs.emplace(stats.modality, stats).second) {
                throw ConfigError(path.string(), "modality \"" + stats.modality + "\" appears twice", "");
            }
        }
        const auto table = build_comparison_table(runs, load_reference_rows(default_reference_rows_path()));
        const fs::path dir = make_dir(opts.out.empty() ? opts.runs_dir : opts.out);
        write_text(table.to_csv(), dir / "comparison.csv");
        write_text(table.to_text(), dir / "comparison.txt");
        write_json(table.to_json(), dir / "comparison.json");
        out << table.to_text();
        return static_cast<int>(kExitOk);
    });
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Radar-assisted stroboscopic vibration detection simulator"};
    app.require_subcommand(1);
    CliOptions opts;
    std::string seeds;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--scenario", opts.scenario, "Scenario JSON file");
        sub->add_option("--preset", opts.preset, "Built-in scenario (used without --scenario)");
        sub->add_option("--out", opts.out, "Output directory (default: scenario, $STROBEVIB_OUT, ./out)");
        sub->add_option("--seeds", seeds, "Comma-separated seeds overriding the scenario");
        sub->add_flag("--verbose", opts.verbose, "Progress on stderr");
    };
    auto* simulate = app.add_subcommand("simulate", "Write the radar trace and strobed frames");
    add_common(simulate);
    auto* detect = app.add_subcommand("detect", "Detect source frequencies");
    add_common(detect);
    detect->add_option("--mode", opts.mode, "proposed, rf_only, strobe_linear or strobe_crt")
        ->check(CLI::IsMember(detect_modes()));
    auto* wobble = app.add_subcommand("wobble", "Dual-view rotor wobble analysis");
    add_common(wobble);
    auto* report = app.add_subcommand("report", "Comparison table from run_stats.json files");
    report->add_option("runs_dir", opts.runs_dir, "Directory searched for run_stats.json")->required();
    report->add_option("--out", opts.out, "Where to write the table (default: runs_dir)");
    report->add_flag("--verbose", opts.verbose, "Progress on stderr");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }

    if (!seeds.empty()) {
        std::stringstream ss(seeds);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                std::size_t used = 0;
                if (item.empty() || item[0] == '-') throw std::invalid_argument(item);
                opts.seeds.push_back(std::stoull(item, &used));
                if (used != item.size()) throw std::invalid_argument(item);
            } catch (const std::exception&) {
                err << "error: --seeds: expected comma-separated non-negative integers, got \"" << item << "\"\n";
                return kExitConfig;
            }
        }
    }

    if (*simulate) return cmd_simulate(opts, out, err);
    if (*detect) return cmd_detect(opts, out, err);
    if (*wobble) return cmd_wobble(opts, out, err);
    return cmd_report(opts, out, err);
}

}  // namespace strobevib
