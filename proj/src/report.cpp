#include "bell/report.hpp"

#include <charconv>
#include <cmath>

#include "bell/errors.hpp"
#include "bell/score.hpp"

namespace bell::report {

namespace {

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string cell(const std::optional<double>& v) { return v ? score::format_2dp(*v) : ""; }

std::optional<double> technique_value(const Scorecard& card, TechniqueKind k) {
  auto it = card.per_technique.find(k);
  if (it == card.per_technique.end()) return std::nullopt;
  return it->second;
}

std::string display_name(TechniqueKind k) {
  switch (k) {
    case TechniqueKind::Cot: return "CoT";
    case TechniqueKind::Thot: return "ThoT";
    case TechniqueKind::ReReadCot: return "ReRead CoT";
    case TechniqueKind::ReReadThot: return "Reread ThoT";
    case TechniqueKind::Cove: return "CoVe";
    case TechniqueKind::Got: return "GoT";
    case TechniqueKind::Lot: return "LoT";
  }
  return "";
}

}  // namespace

std::string to_csv(const std::vector<Scorecard>& cards) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& card : cards) {
    out += csv_field(card.model_id);
    for (TechniqueKind k : kScoredTechniques) out += "," + cell(technique_value(card, k));
    out += "," + cell(card.hallucination_pct);
    out += "," + cell(card.model_score);
    out += '\n';
  }
  return out;
}

std::string to_markdown(const std::vector<Scorecard>& cards) {
  std::string out = "| Model |";
  std::string rule = "|---|";
  for (TechniqueKind k : kScoredTechniques) {
    out += " " + display_name(k) + " |";
    rule += "---:|";
  }
  out += " Hallucination | Model Score |\n";
  rule += "---:|---:|\n";
  out += rule;
  for (const auto& card : cards) {
    out += "| " + card.model_id + " |";
    for (TechniqueKind k : kScoredTechniques) {
      auto v = technique_value(card, k);
      out += " " + (v ? score::format_2dp(*v) : std::string("-")) + " |";
    }
    out += " " + (card.hallucination_pct ? score::format_2dp(*card.hallucination_pct) : "-") + " |";
    out += " " + (card.model_score ? score::format_2dp(*card.model_score) : "-") + " |\n";
  }
  return out;
}

std::string to_json_text(const Scorecard& card) { return json(card).dump(2) + "\n"; }

void to_json(json& j, const ChartSeries& s) {
  j = json{{"model_id", s.model_id}, {"labels", s.labels}, {"values", s.values}};
}

ChartSeries chart_series(const Scorecard& card) {
  ChartSeries s;
  s.model_id = card.model_id;
  for (TechniqueKind k : kAllTechniques) {
    if (auto v = technique_value(card, k)) {
      s.labels.emplace_back(to_string(k));
      s.values.push_back(score::round_half_up(*v, 2));
    }
  }
  if (card.hallucination_pct) {
    s.labels.emplace_back("hallucination");
    s.values.push_back(score::round_half_up(*card.hallucination_pct, 2));
  }
  return s;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t line = 1;
  std::size_t quote_line = 0;
  auto end_row = [&] {
    row.push_back(std::move(field));
    field.clear();
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
    field_started = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
      quote_line = line;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      field_started = false;
    } else if (c == '\n') {
      end_row();
      ++line;
    } else if (c == '\r') {
      // part of CRLF
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw ConfigError("CSV line " + std::to_string(quote_line) + ": unterminated quoted field");
  if (field_started || !row.empty()) end_row();
  return rows;
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

double parse_number(const std::string& text, std::size_t row, const std::string& column) {
  std::string t = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) {
    throw ConfigError("row " + std::to_string(row) + ", column '" + column + "': '" + text +
                      "' is not a number");
  }
  return v;
}

}  // namespace

std::vector<TableRow> read_score_table(std::string_view text) {
  auto rows = parse_csv(text);
  if (rows.empty()) throw ConfigError("score table is empty");
  const auto& header = rows.front();
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[trim(header[i])] = i;
  static const std::vector<std::string> kRequired = {"model",       "cot",  "thot",         "reread_cot",
                                                     "reread_thot", "cove", "hallucination"};
  for (const auto& name : kRequired) {
    if (!col.count(name)) throw ConfigError("header: missing column '" + name + "'");
  }
  const bool has_printed = col.count("model_score") != 0;

  std::vector<TableRow> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    if (cells.size() != header.size()) {
      throw ConfigError("row " + std::to_string(r) + ": expected " + std::to_string(header.size()) +
                        " columns, found " + std::to_string(cells.size()));
    }
    TableRow row;
    row.row = r;
    row.model = trim(cells[col["model"]]);
    if (row.model.empty()) throw ConfigError("row " + std::to_string(r) + ", column 'model': empty");
    for (TechniqueKind k : kScoredTechniques) {
      const std::string name(to_string(k));
      row.per_technique[k] = parse_number(cells[col[name]], r, name);
    }
    row.hallucination_pct = parse_number(cells[col["hallucination"]], r, "hallucination");
    if (has_printed && !trim(cells[col["model_score"]]).empty()) {
      row.printed_model_score = parse_number(cells[col["model_score"]], r, "model_score");
    }
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace bell::report
