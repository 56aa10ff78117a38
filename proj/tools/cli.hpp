#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

namespace boundtail::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kNumericalFailure = 3 };

/// Command-line overrides; each one wins over the config file.
struct Flags {
  std::optional<std::string> out;
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> seed;
};

/// Runs one of analyze | density | bifurcation | scaling | simulate on a parsed
/// config. Diagnostics go to `log`. Returns an ExitCode.
int run_command(const std::string& command, const nlohmann::json& config, const Flags& flags,
                std::ostream& log);

/// Full command line: `boundtail <command> --config PATH [--out DIR] [--threads N] [--seed S]`.
int run(int argc, const char* const* argv);

}  // namespace boundtail::cli
