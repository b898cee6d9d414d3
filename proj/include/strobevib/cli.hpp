#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace strobevib {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitIo = 3, kExitUnresolved = 4 };

struct CliOptions {
    std::filesystem::path scenario;
    std::string preset;                // used when no scenario file is given
    std::filesystem::path out;         // empty: scenario, then STROBEVIB_OUT, then "out"
    std::string mode;                  // empty: the scenario's mode
    std::vector<std::uint64_t> seeds;  // empty: the scenario's seeds
    std::filesystem::path runs_dir;    // report only
    bool verbose = false;
};

// Each command returns an ExitCode and reports failures on `err`. Progress
// goes to `err` as well when verbose; results summaries go to `out`.
int cmd_simulate(const CliOptions& opts, std::ostream& out, std::ostream& err);
int cmd_detect(const CliOptions& opts, std::ostream& out, std::ostream& err);
int cmd_wobble(const CliOptions& opts, std::ostream& out, std::ostream& err);
int cmd_report(const CliOptions& opts, std::ostream& out, std::ostream& err);

/// Parses `argv` and dispatches to one of the commands above.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace strobevib
