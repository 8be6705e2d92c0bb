#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bell/core.hpp"

namespace bell::dataset {

struct LineViolation {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct LoadResult {
  std::vector<EvalRecord> records;
  std::vector<LineViolation> violations;
  std::vector<std::string> warnings;
  std::size_t total_rows = 0;  // non-blank lines seen
};

/// Fraction of malformed lines above which load() gives up.
inline constexpr double kMaxMalformedFraction = 0.10;

/// Reads a JSON-Lines file with fields id, system_prompt, question, response.
/// Malformed lines are reported and skipped. Throws IoError when the file
/// cannot be read and DatasetError when more than 10% of lines are malformed.
LoadResult load(const std::filesystem::path& path);

/// Same as load() over in-memory text; `source` names it in diagnostics.
LoadResult parse_jsonl(std::string_view text, std::string_view source = "<memory>");

/// Canonical JSON-Lines rendering; load() of this text yields `records` again.
std::string to_jsonl(const std::vector<EvalRecord>& records);
void write(const std::filesystem::path& path, const std::vector<EvalRecord>& records);

/// Keyword/regex rules matching arithmetic and algebra word problems.
const std::vector<std::string>& default_math_rules();

/// Keeps records whose question matches any rule, case-insensitively, as a
/// regular expression search. Order is preserved. Throws ConfigError on an
/// empty rule list or an invalid pattern.
std::vector<EvalRecord> filter_category(const std::vector<EvalRecord>& records,
                                        const std::vector<std::string>& keyword_rules);

/// Deterministic sample without replacement of min(k, size) records.
/// The permutation is a partial Fisher-Yates shuffle driven by a
/// SplitMix64 stream, so results do not depend on the standard library.
std::vector<EvalRecord> sample(const std::vector<EvalRecord>& records, std::size_t k,
                               std::uint64_t seed);

struct DatasetManifest {
  std::string source_path;
  std::size_t total_rows = 0;
  std::vector<std::string> selected_ids;
  std::string category_filter;
  std::uint64_t sample_seed = 0;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

void to_json(json& j, const DatasetManifest& m);
void from_json(const json& j, DatasetManifest& m);

}  // namespace bell::dataset
