#pragma once

// Subcommand implementations behind the `bell` executable. Each returns the
// process exit code: 0 success, 1 fatal, 2 partial.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bell/pipeline.hpp"

namespace bell::commands {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitPartial = 2;

struct RunOverrides {
  std::optional<std::string> out;
  std::optional<std::string> techniques;  // comma list
  std::optional<std::size_t> sample;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
};

/// Applies command-line overrides on top of a loaded config.
void apply_overrides(pipeline::RunConfig& config, const RunOverrides& overrides);

int cmd_run(const std::filesystem::path& config_path, const RunOverrides& overrides,
            std::ostream& out, std::ostream& err, const pipeline::RunOptions& options = {});

int cmd_resume(const std::filesystem::path& config_path, const RunOverrides& overrides,
               std::ostream& out, std::ostream& err, const pipeline::RunOptions& options = {});

/// format: csv, json, md or chart. `out_path` empty writes to `out`; for
/// chart it names the directory (default <run_dir>/charts).
int cmd_report(const std::filesystem::path& run_dir, const std::string& format,
               const std::filesystem::path& out_path, std::ostream& out, std::ostream& err);

/// Recomputes the model_score column of a scorecard-schema CSV.
int cmd_score(const std::filesystem::path& table_csv, std::ostream& out, std::ostream& err);

int cmd_validate_dataset(const std::filesystem::path& path, std::ostream& out, std::ostream& err);

}  // namespace bell::commands
