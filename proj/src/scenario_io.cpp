#include "strobevib/scenario_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "strobevib/error.hpp"

namespace strobevib {

using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Line index: a forgiving scanner over text nlohmann has already accepted.

namespace {

class LineScanner {
public:
    explicit LineScanner(const std::string& text) : s_(text) {}

    std::map<std::string, int> run() {
        skip_ws();
        if (pos_ < s_.size()) value("");
        return std::move(index_);
    }

private:
    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) {
            if (s_[pos_] == '\n') ++line_;
            ++pos_;
        }
    }

    std::string string_token() {
        std::string out;
        ++pos_;  // opening quote
        while (pos_ < s_.size() && s_[pos_] != '"') {
            if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) {
                out += s_[pos_ + 1];
                pos_ += 2;
                continue;
            }
            out += s_[pos_++];
        }
        ++pos_;  // closing quote
        return out;
    }

    void value(const std::string& path) {
        skip_ws();
        if (pos_ >= s_.size()) return;
        const char c = s_[pos_];
        if (c == '{') {
            ++pos_;
            for (;;) {
                skip_ws();
                if (pos_ >= s_.size() || s_[pos_] == '}') break;
                if (s_[pos_] == ',') {
                    ++pos_;
                    continue;
                }
                const int line = line_;
                const std::string key = string_token();
                const std::string child = path.empty() ? key : path + "." + key;
                index_.emplace(child, line);
                skip_ws();
                if (pos_ < s_.size() && s_[pos_] == ':') ++pos_;
                value(child);
            }
            ++pos_;
        } else if (c == '[') {
            ++pos_;
            int i = 0;
            for (;;) {
                skip_ws();
                if (pos_ >= s_.size() || s_[pos_] == ']') break;
                if (s_[pos_] == ',') {
                    ++pos_;
                    continue;
                }
                const std::string child = path + "[" + std::to_string(i++) + "]";
                index_.emplace(child, line_);
                value(child);
            }
            ++pos_;
        } else if (c == '"') {
            string_token();
        } else {
            while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != '}' && s_[pos_] != ']' &&
                   !std::isspace(static_cast<unsigned char>(s_[pos_]))) {
                ++pos_;
            }
        }
    }

    const std::string& s_;
    std::size_t pos_ = 0;
    int line_ = 1;
    std::map<std::string, int> index_;
};

}  // namespace

std::map<std::string, int> json_line_index(const std::string& text) { return LineScanner(text).run(); }

// ---------------------------------------------------------------------------
// Field visitors. One `visit` per struct drives both reading and writing.

namespace {

struct Origin {
    std::string name;
    std::map<std::string, int> lines;

    std::string where(const std::string& field) const {
        std::string path = field;
        while (!path.empty()) {
            if (auto it = lines.find(path); it != lines.end()) return name + ":" + std::to_string(it->second);
            const auto cut = path.find_last_of(".[");
            if (cut == std::string::npos) break;
            path.resize(cut);
        }
        return name;
    }

    [[noreturn]] void fail(const std::string& field, const std::string& message) const {
        throw ConfigError(where(field), message, field);
    }
};

class Reader;
class Writer;

template <typename V> void visit(V& v, NoiseModel& n);
template <typename V> void visit(V& v, Wobble& w);
template <typename V> void visit(V& v, Drift& d);
template <typename V> void visit(V& v, SourceSpec& s);
template <typename V> void visit(V& v, Scene& s);
template <typename V> void visit(V& v, PeakSettings& p);
template <typename V> void visit(V& v, FlowSettings& f);
template <typename V> void visit(V& v, VisionSettings& s);
template <typename V> void visit(V& v, ControllerConfig& c);
template <typename V> void visit(V& v, WobbleConfig& w);
template <typename V> void visit(V& v, SimulateConfig& s);

template <typename T>
concept Visitable = requires(Reader& r, T& t) { visit(r, t); };

class Reader {
public:
    Reader(const json& j, std::string path, const Origin& origin) : j_(j), path_(std::move(path)), origin_(origin) {
        if (!j_.is_object()) origin_.fail(path_, "expected an object");
    }

    template <typename T>
    void operator()(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        read(j_.at(key), child(key), out);
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.count(key)) origin_.fail(child(key), "unknown field");
        }
    }

private:
    std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void read(const json& v, const std::string& p, double& out) const {
        if (p == "scene.d0_m" && v.is_string() && v.get<std::string>() == "off_null") {
            out = std::numeric_limits<double>::quiet_NaN();
            return;
        }
        if (!v.is_number()) origin_.fail(p, "expected a number");
        out = v.get<double>();
    }
    void read(const json& v, const std::string& p, float& out) const {
        double d = 0.0;
        read(v, p, d);
        out = static_cast<float>(d);
    }
    void read(const json& v, const std::string& p, int& out) const {
        if (!v.is_number_integer()) origin_.fail(p, "expected an integer");
        const auto i = v.get<std::int64_t>();
        if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max()) {
            origin_.fail(p, "integer out of range");
        }
        out = static_cast<int>(i);
    }
    void read(const json& v, const std::string& p, std::uint64_t& out) const {
        if (!v.is_number_unsigned()) origin_.fail(p, "expected a non-negative integer");
        out = v.get<std::uint64_t>();
    }
    void read(const json& v, const std::string& p, bool& out) const {
        if (!v.is_boolean()) origin_.fail(p, "expected true or false");
        out = v.get<bool>();
    }
    void read(const json& v, const std::string& p, std::string& out) const {
        if (!v.is_string()) origin_.fail(p, "expected a string");
        out = v.get<std::string>();
    }
    void read(const json& v, const std::string& p, std::filesystem::path& out) const {
        std::string s;
        read(v, p, s);
        out = s;
    }
    void read(const json& v, const std::string& p, Vec2& out) const {
        if (!v.is_array() || v.size() != 2) origin_.fail(p, "expected [x, y]");
        read(v[0], p + "[0]", out.x);
        read(v[1], p + "[1]", out.y);
    }
    void read(const json& v, const std::string& p, SourceKind& out) const {
        std::string s;
        read(v, p, s);
        if (s == "linear") {
            out = SourceKind::linear;
        } else if (s == "rotor") {
            out = SourceKind::rotor;
        } else {
            origin_.fail(p, "expected \"linear\" or \"rotor\", got \"" + s + "\"");
        }
    }
    template <typename T>
    void read(const json& v, const std::string& p, std::vector<T>& out) const {
        if (!v.is_array()) origin_.fail(p, "expected an array");
        std::vector<T> items;
        for (std::size_t i = 0; i < v.size(); ++i) {
            T item{};
            read(v[i], p + "[" + std::to_string(i) + "]", item);
            items.push_back(std::move(item));
        }
        out = std::move(items);
    }
    void read(const json& v, const std::string& p, std::set<int>& out) const {
        std::vector<int> items;
        read(v, p, items);
        out = std::set<int>(items.begin(), items.end());
    }
    void read(const json& v, const std::string& p, std::map<std::string, std::set<int>>& out) const {
        if (!v.is_object()) origin_.fail(p, "expected an object of blade-count lists");
        std::map<std::string, std::set<int>> m;
        for (const auto& [key, value] : v.items()) read(value, p + "." + key, m[key]);
        out = std::move(m);
    }
    template <typename T>
    void read(const json& v, const std::string& p, std::optional<T>& out) const {
        if (v.is_null()) {
            out.reset();
            return;
        }
        T t = out.value_or(T{});
        read(v, p, t);
        out = t;
    }
    template <Visitable T>
    void read(const json& v, const std::string& p, T& out) const {
        Reader sub(v, p, origin_);
        visit(sub, out);
        sub.finish();
    }

    const json& j_;
    std::string path_;
    const Origin& origin_;
    std::set<std::string> seen_;
};

class Writer {
public:
    template <typename T>
    void operator()(const char* key, const T& value) {
        j_[key] = write(value);
    }

    ordered_json take() { return std::move(j_); }

private:
    template <typename T>
    static ordered_json write(const T& value) {
        return value;
    }
    static ordered_json write(const std::filesystem::path& value) { return value.generic_string(); }
    static ordered_json write(const Vec2& v) { return ordered_json::array({v.x, v.y}); }
    static ordered_json write(SourceKind k) { return k == SourceKind::rotor ? "rotor" : "linear"; }
    static ordered_json write(const std::set<int>& s) { return std::vector<int>(s.begin(), s.end()); }
    static ordered_json write(const std::map<std::string, std::set<int>>& m) {
        ordered_json j = ordered_json::object();
        for (const auto& [key, set] : m) j[key] = write(set);
        return j;
    }
    template <typename T>
    static ordered_json write(const std::vector<T>& items) {
        ordered_json j = ordered_json::array();
        for (const auto& item : items) j.push_back(write(item));
        return j;
    }
    template <typename T>
    static ordered_json write(const std::optional<T>& value) {
        return value ? write(*value) : ordered_json(nullptr);
    }
    template <Visitable T>
    static ordered_json write(const T& value) {
        Writer sub;
        visit(sub, const_cast<T&>(value));
        return sub.take();
    }

    ordered_json j_ = ordered_json::object();
};

template <typename V>
void visit(V& v, NoiseModel& n) {
    v("radar_snr_db", n.radar_snr_db);
    v("pixel_noise_sigma", n.pixel_noise_sigma);
}

template <typename V>
void visit(V& v, Wobble& w) {
    v("amp_x_mm", w.amp_x_mm);
    v("amp_y_mm", w.amp_y_mm);
    v("freq_hz", w.freq_hz);
    v("x0_mm", w.x0_mm);
    v("y0_mm", w.y0_mm);
}

template <typename V>
void visit(V& v, Drift& d) {
    v("end_freq_hz", d.end_freq_hz);
    v("period_s", d.period_s);
}

template <typename V>
void visit(V& v, SourceSpec& s) {
    v("id", s.id);
    v("kind", s.kind);
    v("center_px", s.center_px);
    v("range_m", s.range_m);
    v("amplitude_mm", s.amplitude_mm);
    v("freq_hz", s.freq_hz);
    v("phase_rad", s.phase_rad);
    v("blade_count", s.blade_count);
    v("wobble", s.wobble);
    v("drift", s.drift);
    v("reflectivity", s.reflectivity);
    v("axis", s.axis);
    v("blade_width_rad", s.blade_width_rad);
    v("patch_half_px", s.patch_half_px);
}

template <typename V>
void visit(V& v, Scene& s) {
    v("width", s.width);
    v("height", s.height);
    v("fps", s.fps);
    v("wavelength_m", s.wavelength_m);
    v("d0_m", s.d0_m);
    v("noise", s.noise);
    v("seed", s.seed);
    v("px_per_mm", s.px_per_mm);
    v("ambient_gray", s.ambient_gray);
    v("background_gray", s.background_gray);
    v("sources", s.sources);
}

template <typename V>
void visit(V& v, PeakSettings& p) {
    v("threshold_rel", p.threshold_rel);
    v("min_separation_hz", p.min_separation_hz);
    v("max_peaks", p.max_peaks);
    v("min_freq_hz", p.min_freq_hz);
}

template <typename V>
void visit(V& v, FlowSettings& f) {
    v("window_radius", f.window_radius);
    v("min_eigenvalue", f.min_eigenvalue);
    v("iterations", f.iterations);
    v("presmooth_sigma", f.presmooth_sigma);
}

template <typename V>
void visit(V& v, VisionSettings& s) {
    v("flow", s.flow);
    v("lambda", s.lambda);
    v("motion_floor", s.motion_floor);
    v("active_fraction", s.active_fraction);
    v("roi_margin_px", s.roi_margin_px);
    v("merge_gap_px", s.merge_gap_px);
    v("min_roi_points", s.min_roi_points);
    v("static_px", s.static_px);
    v("freq_step", s.freq_step);
    v("min_freq", s.min_freq);
    v("lit_fraction", s.lit_fraction);
}

template <typename V>
void visit(V& v, ControllerConfig& c) {
    v("radar_on", c.radar_on);
    v("camera_on", c.camera_on);
    v("freeze_threshold", c.freeze_threshold);
    v("alpha_max", c.alpha_max);
    v("max_refinements", c.max_refinements);
    v("duty", c.duty);
    v("blade_hypotheses", c.blade_hypotheses);
    v("step_overhead", c.step_overhead);
    v("roi_count", c.roi_count);
    v("localization_detune", c.localization_detune);
    v("min_coherence", c.min_coherence);
    v("roi_match_px", c.roi_match_px);
    v("radar_sample_rate", c.radar_sample_rate);
    v("peaks", c.peaks);
    v("vision", c.vision);
    v("drift_half_window_hz", c.drift_half_window_hz);
    v("drift_energy_fraction", c.drift_energy_fraction);
    v("drift_width_factor", c.drift_width_factor);
    v("scan_start_hz", c.scan_start_hz);
    v("scan_step_hz", c.scan_step_hz);
    v("scan_ceiling_hz", c.scan_ceiling_hz);
    v("crt_moduli", c.crt_moduli);
    v("crt_probe_offset_hz", c.crt_probe_offset_hz);
}

template <typename V>
void visit(V& v, WobbleConfig& w) {
    v("strobe_hz", w.strobe_hz);
    v("capture_s", w.capture_s);
    v("duty", w.duty);
    v("localization_detune", w.localization_detune);
    v("radius_threshold_mm", w.radius_threshold_mm);
    v("roi_count", w.roi_count);
    v("vision", w.vision);
}

template <typename V>
void visit(V& v, SimulateConfig& s) {
    v("radar_duration_s", s.radar_duration_s);
    v("radar_sample_rate", s.radar_sample_rate);
    v("capture_s", s.capture_s);
    v("strobe_hz", s.strobe_hz);
    v("duty", s.duty);
}

template <typename V>
void visit_top(V& v, ScenarioFile& f) {
    v("preset", f.preset);
    v("mode", f.mode);
    v("seeds", f.seeds);
    v("output_dir", f.output_dir);
    v("views", f.views);
    v("roi_matching", f.roi_matching);
    v("scene", f.scene);
    v("controller", f.controller);
    v("wobble", f.wobble);
    v("simulate", f.simulate);
}

}  // namespace

// ---------------------------------------------------------------------------

void SimulateConfig::validate() const {
    if (!(radar_duration_s > 0.0)) throw ConfigError("must be > 0", "simulate.radar_duration_s");
    if (!(radar_sample_rate > 0.0)) throw ConfigError("must be > 0", "simulate.radar_sample_rate");
    if (!(capture_s > 0.0)) throw ConfigError("must be > 0", "simulate.capture_s");
    if (strobe_hz < 0.0) throw ConfigError("must be >= 0", "simulate.strobe_hz");
    if (!(duty > 0.0 && duty <= 1.0)) throw ConfigError("must lie in (0, 1]", "simulate.duty");
}

bool ScenarioFile::dual_view() const {
    const auto has = [&](const char* v) { return std::find(views.begin(), views.end(), v) != views.end(); };
    return has("horizontal") && has("vertical");
}

void ScenarioFile::validate() const {
    if (seeds.empty()) throw ConfigError("must list at least one seed", "seeds");
    const auto& modes = detect_modes();
    if (std::find(modes.begin(), modes.end(), mode) == modes.end()) {
        throw ConfigError("unknown mode \"" + mode + "\"", "mode");
    }
    if (views.empty()) throw ConfigError("must list at least one view", "views");
    for (std::size_t i = 0; i < views.size(); ++i) {
        const auto& v = views[i];
        if (v != "front" && v != "horizontal" && v != "vertical") {
            throw ConfigError("expected front, horizontal or vertical", "views[" + std::to_string(i) + "]");
        }
        if (std::count(views.begin(), views.end(), v) > 1) {
            throw ConfigError("duplicate view", "views[" + std::to_string(i) + "]");
        }
    }
    if (roi_matching != "centroid_x") throw ConfigError("only \"centroid_x\" is supported", "roi_matching");
    scene.validate();
    controller.validate();
    wobble.validate();
    simulate.validate();
}

namespace {

SourceSpec linear_source(const std::string& id, double freq, Vec2 center) {
    SourceSpec s;
    s.id = id;
    s.kind = SourceKind::linear;
    s.freq_hz = freq;
    s.center_px = center;
    s.amplitude_mm = 1.0;
    return s;
}

SourceSpec rotor_source(const std::string& id, double freq, int blades, double radius_mm, Vec2 center) {
    SourceSpec s;
    s.id = id;
    s.kind = SourceKind::rotor;
    s.freq_hz = freq;
    s.blade_count = blades;
    s.amplitude_mm = radius_mm;
    s.center_px = center;
    return s;
}

std::string bare_message(const ConfigError& e) {
    const std::string what = e.what();
    return e.field().empty() ? what : what.substr(e.field().size() + 2);
}

ScenarioFile base_scenario(const std::string& name) {
    ScenarioFile f;
    f.preset = name;
    f.scene.d0_m = off_null_range(f.scene.wavelength_m, 1.0);
    f.seeds = {1};
    return f;
}

}  // namespace

std::vector<std::string> preset_names() { return {"drift", "exp1", "exp1_single", "exp2", "exp2b", "exp2c", "exp3"}; }

ScenarioFile preset_scenario(const std::string& name) {
    ScenarioFile f = base_scenario(name);
    auto& sources = f.scene.sources;
    if (name == "exp1" || name == "exp1_single") {
        sources.push_back(linear_source("left", 113.0, {80.0, 120.0}));
        if (name == "exp1") sources.push_back(linear_source("right", 141.0, {240.0, 120.0}));
        f.controller.blade_hypotheses["linear"] = {1};
        f.controller.crt_moduli = {27, 29};  // both residues of 113 Hz stay well inside the camera band
        f.seeds.clear();
        for (std::uint64_t s = 1; s <= 20; ++s) f.seeds.push_back(s);
    } else if (name == "exp2") {
        sources.push_back(rotor_source("pump", 40.0, 10, 8.0, {160.0, 120.0}));
        f.controller.blade_hypotheses["rotor"] = {10};
    } else if (name == "exp2b") {
        sources.push_back(rotor_source("motor", 300.0, 2, 8.0, {160.0, 120.0}));
        f.controller.blade_hypotheses["rotor"] = {2};
    } else if (name == "exp2c") {
        sources.push_back(rotor_source("left", 62.0, 4, 8.0, {80.0, 120.0}));
        sources.push_back(rotor_source("right", 31.0, 3, 8.0, {240.0, 120.0}));
        f.controller.blade_hypotheses["rotor"] = {3, 4};
    } else if (name == "exp3") {
        f.scene.px_per_mm = 2.0;
        auto left = rotor_source("left", 30.0, 3, 15.0, {80.0, 120.0});
        left.wobble = Wobble{2.0, 1.0, 5.0, 0.0, 0.0};
        auto right = rotor_source("right", 30.0, 3, 15.0, {240.0, 120.0});
        right.wobble = Wobble{};
        sources.push_back(left);
        sources.push_back(right);
        f.controller.blade_hypotheses["rotor"] = {3};
        f.views = {"horizontal", "vertical"};
    } else if (name == "drift") {
        auto s = linear_source("chirp", 100.0, {160.0, 120.0});
        s.drift = Drift{105.0, 2.0};
        sources.push_back(s);
        f.controller.blade_hypotheses["linear"] = {1};
    } else {
        std::string known;
        for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
        throw ConfigError("unknown preset \"" + name + "\" (known: " + known + ")", "preset");
    }
    return f;
}

ScenarioFile parse_scenario(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t byte = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n');
        throw ConfigError(origin + ":" + std::to_string(line), "malformed JSON", "");
    }
    Origin where{origin, json_line_index(text)};
    if (!j.is_object()) where.fail("", "scenario must be a JSON object");

    ScenarioFile f;
    f.scene.d0_m = off_null_range(f.scene.wavelength_m, 1.0);
    if (j.contains("preset")) {
        if (!j["preset"].is_string()) where.fail("preset", "expected a string");
        try {
            f = preset_scenario(j["preset"].get<std::string>());
        } catch (const ConfigError& e) {
            where.fail("preset", bare_message(e));
        }
    }
    Reader reader(j, "", where);
    visit_top(reader, f);
    reader.finish();
    if (std::isnan(f.scene.d0_m)) f.scene.d0_m = off_null_range(f.scene.wavelength_m, 1.0);
    try {
        f.validate();
    } catch (const ConfigError& e) {
        where.fail(e.field(), bare_message(e));
    }
    return f;
}

ScenarioFile load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read scenario " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path.string());
}

nlohmann::ordered_json to_json(const ScenarioFile& scenario) {
    Writer w;
    visit_top(w, const_cast<ScenarioFile&>(scenario));
    return w.take();
}

}  // namespace strobevib
