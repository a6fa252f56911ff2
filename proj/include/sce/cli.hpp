#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "sce/config.hpp"
#include "sce/error.hpp"

namespace sce::cli {

/// Process exit statuses.
enum ExitCode : int {
  exit_ok = 0,
  exit_internal = 1,
  exit_usage = 2,
  exit_input = 3,    // parse, reference, validation, checkpoint and config errors
  exit_numeric = 4,  // non-finite values, failed gradient check
  exit_io = 5,
};

class UsageError : public Error {
 public:
  using Error::Error;
};

/// Thrown by parse_args for --help; carries the rendered help text.
class HelpRequested : public Error {
 public:
  using Error::Error;
};

enum class Verb { gen_synthetic, train, eval, ablate, baseline, export_embeddings, check_grads };

std::string to_string(Verb verb);

struct Command {
  Verb verb = Verb::train;
  std::string config_path;      // empty when none was given
  nlohmann::json overrides;     // flag values, in config-file layout
  std::filesystem::path out_dir;
  RunConfig config;             // file merged with overrides
  GradientSuiteSettings grad;   // check-grads only
};

/// `args` excludes the program name. Throws UsageError for an unknown verb
/// or flag, a missing required value, or conflicting options, and
/// ConfigError for a config file with bad contents.
Command parse_args(const std::vector<std::string>& args);

/// Runs a parsed command. Writes effective_config.json plus the verb's
/// outputs into command.out_dir. Library errors propagate.
void run(const Command& command, std::ostream& log);

/// Maps an in-flight exception to its exit code.
int exit_code_for(const std::exception& error) noexcept;

/// parse_args + run with all errors turned into a one-line diagnostic on
/// `err` and an exit code.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sce::cli
