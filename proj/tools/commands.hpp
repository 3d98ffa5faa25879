#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace phylo::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kIoError = 3, kNumericError = 4 };

struct KeySpec {
  std::string key;
  std::string default_value;
  std::string help;
};

struct CommandSpec {
  std::string name;
  std::string summary;
  std::vector<KeySpec> keys;
};

/// Every subcommand with its documented keys, in help order.
const std::vector<CommandSpec>& commands();
const CommandSpec& command(const std::string& name);

using Config = std::map<std::string, std::string>;

/// key=value lines; blank lines and lines starting with '#' are skipped.
Config parse_config(const std::string& text);
Config read_config_file(const std::filesystem::path& path);

/// Defaults, then the config file, then flags. Unknown keys are rejected.
/// A "command" entry in the file (as written to manifests) must name `cmd`.
Config resolve_config(const CommandSpec& cmd, const Config& file, const Config& flags);

/// "command=<name>" followed by every key in documented order.
std::string manifest_text(const CommandSpec& cmd, const Config& cfg);

/// Runs one subcommand with a fully resolved config. Throws phylo errors.
void execute(const std::string& name, const Config& cfg, std::ostream& log);

/// Parses argv-style arguments (without the program name), runs the command and
/// maps failures to exit codes, reporting them on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace phylo::cli
