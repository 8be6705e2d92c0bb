#pragma once

// Full benchmark run: dataset x techniques for one evaluated model, with
// a content-addressed cache, bounded worker pool, resumable manifest and
// scorecard emission.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bell/backend.hpp"
#include "bell/core.hpp"
#include "bell/dataset.hpp"
#include "bell/elicit.hpp"
#include "bell/metrics.hpp"
#include "bell/score.hpp"

namespace bell::pipeline {

inline constexpr std::string_view kHarnessVersion = "0.1.0";

struct DatasetSpec {
  std::string path;
  /// "math" (default rule set), "all" (no filter) or "custom" (rules below).
  std::string category = "math";
  std::vector<std::string> rules;
  std::optional<std::size_t> sample;  // nullopt: every filtered record
  std::uint64_t seed = 0;
};

struct RunConfig {
  DatasetSpec dataset;
  std::vector<BackendProfile> profiles;
  std::string model;
  std::string judge;
  std::string embedder;
  std::vector<TechniqueKind> techniques;
  score::AggregationMode mode = score::AggregationMode::Printed;
  std::string output_dir;
  std::string cache_dir;  // empty: <output_dir>/cache
  int workers = 4;
  /// Also run the plain completion that feeds the hallucination column.
  bool hallucination = true;
  elicit::ElicitConfig elicit;
  metrics::MetricsConfig metrics;

  const BackendProfile& profile(const std::string& name) const;
};

/// Parses a config document. Relative paths resolve against `base_dir`.
/// Throws ConfigError with a positioned diagnostic for malformed JSON and
/// a named diagnostic for missing or invalid settings.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

/// Throws ConfigError naming the first problem found.
void validate_config(const RunConfig& config);

/// Settings that affect results; config_hash is the SHA-256 of their
/// canonical serialization. Worker counts, limits, timeouts, key variable
/// names and output locations are excluded.
json determinism_settings(const RunConfig& config);
std::string config_hash(const RunConfig& config);

/// Dotted paths of leaves that differ between two settings documents.
std::vector<std::string> changed_settings(const json& before, const json& after);

enum class Status { Pending, Done, Partial, Failed };
std::string_view to_string(Status s);
Status parse_status(std::string_view s);

struct RecordStatus {
  Status status = Status::Pending;
  std::map<std::string, Status> tasks;  // task name -> status
  std::string error;
};

struct RunManifest {
  std::string config_hash;
  json settings;
  dataset::DatasetManifest dataset;
  std::map<std::string, RecordStatus> records;
  json prompts;  // rendered templates and judge rubrics
  std::string harness_version{kHarnessVersion};
  std::string started_at;
  std::string updated_at;
  /// "running", "interrupted", "complete", "partial", "failed" or "aborted".
  std::string state = "running";

  std::size_t count(Status s) const;
  std::size_t pending_tasks() const;
};

void to_json(json& j, const RunManifest& m);
void from_json(const json& j, RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& path);

struct RunOptions {
  /// Stop dispatching new tasks after this many have finished (simulated
  /// interruption). Finished work is persisted and can be resumed.
  std::optional<std::size_t> stop_after_tasks;
  /// Replaces the HTTP transport of openai profiles.
  std::shared_ptr<HttpTransport> transport;
};

struct RunResult {
  RunManifest manifest;
  std::optional<Scorecard> scorecard;
  std::vector<score::TechniqueAggregate> aggregates;
  std::size_t backend_calls = 0;
  std::size_t tasks_executed = 0;
  std::vector<std::string> failed_ids;
  std::filesystem::path run_dir;
};

RunResult run(const RunConfig& config, const RunOptions& options = {});

/// Continues the run in `run_dir` (config.output_dir when empty). Throws
/// ResumeMismatchError when the settings hash differs.
RunResult resume(const RunConfig& config, const std::filesystem::path& run_dir = {},
                 const RunOptions& options = {});

struct Aggregation {
  std::optional<Scorecard> scorecard;
  std::vector<score::TechniqueAggregate> aggregates;
};

/// Recomputes the scorecard from persisted metric files of done/partial tasks.
Aggregation aggregate_run(const std::filesystem::path& run_dir, const RunManifest& manifest,
                          const std::string& model_id, score::AggregationMode mode);

/// Percent-encodes characters outside [A-Za-z0-9._-] for use in file names.
std::string path_component(std::string_view id);

std::filesystem::path transcript_path(const std::filesystem::path& run_dir,
                                      std::string_view record_id, std::string_view task);
std::filesystem::path metrics_path(const std::filesystem::path& run_dir,
                                   std::string_view record_id, std::string_view task);

/// Write to a temporary sibling, then rename over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

}  // namespace bell::pipeline
