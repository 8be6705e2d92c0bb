#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bell/core.hpp"

namespace bell::report {

inline constexpr std::string_view kCsvHeader =
    "model,cot,thot,reread_cot,reread_thot,cove,hallucination,model_score";

/// One row per scorecard, two-decimal fixed values, empty cells for
/// missing entries. Lines end with '\n'.
std::string to_csv(const std::vector<Scorecard>& cards);
std::string to_markdown(const std::vector<Scorecard>& cards);
std::string to_json_text(const Scorecard& card);

struct ChartSeries {
  std::string model_id;
  std::vector<std::string> labels;
  std::vector<double> values;
};

void to_json(json& j, const ChartSeries& s);

/// Technique scores present in the card, then "hallucination" if known.
ChartSeries chart_series(const Scorecard& card);

/// RFC 4180 style: commas, double-quoted fields with "" escapes, CRLF or LF.
/// Throws ConfigError naming the row on an unterminated quote.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

struct TableRow {
  std::size_t row = 0;  // 1-based data row
  std::string model;
  std::map<TechniqueKind, double> per_technique;
  double hallucination_pct = 0.0;
  std::optional<double> printed_model_score;
};

/// Reads a scorecard-schema CSV (model_score column optional). Throws
/// ConfigError with row/column diagnostics on missing columns or bad cells.
std::vector<TableRow> read_score_table(std::string_view text);

}  // namespace bell::report
