#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "strobevib/controller.hpp"
#include "strobevib/scene.hpp"
#include "strobevib/wobble.hpp"

namespace strobevib {

/// What `simulate` records: one radar trace and one strobed capture.
struct SimulateConfig {
    double radar_duration_s = 1.0;
    double radar_sample_rate = kDefaultRadarSampleRate;
    double capture_s = 1.0;
    double strobe_hz = 0.0;  // 0 leaves the scene continuously lit
    double duty = 0.10;

    void validate() const;
};

struct ScenarioFile {
    std::string preset;  // empty when the file names none
    Scene scene;
    ControllerConfig controller;
    WobbleConfig wobble;
    SimulateConfig simulate;
    std::string mode = "proposed";
    std::vector<std::string> views{"front"};
    std::string roi_matching = "centroid_x";
    std::filesystem::path output_dir;  // empty: caller decides
    std::vector<std::uint64_t> seeds{1};

    bool dual_view() const;
    void validate() const;
};

inline const std::vector<std::string>& detect_modes() {
    static const std::vector<std::string> modes{"proposed", "rf_only", "strobe_linear", "strobe_crt"};
    return modes;
}

std::vector<std::string> preset_names();

/// Throws ConfigError for an unknown name.
ScenarioFile preset_scenario(const std::string& name);

/// Parses scenario JSON text. Fields absent from the text keep the preset's
/// value (or the built-in default when no preset is named). Errors carry
/// "<origin>:<line>: " in front of the field path.
ScenarioFile parse_scenario(const std::string& text, const std::string& origin = "<scenario>");

/// Throws IoError when the file cannot be read.
ScenarioFile load_scenario(const std::filesystem::path& path);

nlohmann::ordered_json to_json(const ScenarioFile& scenario);

/// Line (1-based) of each key and array element in `text`, keyed by dotted
/// path such as "scene.sources[1].freq_hz". Tolerates only valid JSON.
std::map<std::string, int> json_line_index(const std::string& text);

}  // namespace strobevib
