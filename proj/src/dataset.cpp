#include "bell/dataset.hpp"

#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "bell/errors.hpp"

namespace bell::dataset {

namespace {

struct SplitMix64 {
  std::uint64_t state;

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, bound) by rejection of the biased tail.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      std::uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }
};

std::string describe_violations(const ValidationResult& v) {
  std::string out;
  for (const auto& violation : v.violations) {
    if (!out.empty()) out += "; ";
    out += violation.message;
  }
  return out;
}

}  // namespace

LoadResult parse_jsonl(std::string_view text, std::string_view source) {
  LoadResult result;
  std::set<std::string> seen_ids;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    ++result.total_rows;

    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      result.violations.push_back({line_no, std::string("invalid JSON: ") + e.what()});
      continue;
    }
    if (!row.is_object()) {
      result.violations.push_back({line_no, "line is not a JSON object"});
      continue;
    }
    EvalRecord record;
    bool ok = true;
    for (const char* key : {"id", "question", "response"}) {
      if (!row.contains(key)) {
        result.violations.push_back({line_no, std::string("missing \"") + key + "\" key"});
        ok = false;
        break;
      }
      if (!row.at(key).is_string()) {
        result.violations.push_back({line_no, std::string("\"") + key + "\" is not a string"});
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    if (row.contains("system_prompt") && !row.at("system_prompt").is_string()) {
      result.violations.push_back({line_no, "\"system_prompt\" is not a string"});
      continue;
    }
    record.id = row.at("id").get<std::string>();
    record.question = row.at("question").get<std::string>();
    record.baseline_response = row.at("response").get<std::string>();
    record.system_prompt = row.value("system_prompt", std::string{});

    auto validation = validate_record(record);
    if (!validation.ok()) {
      result.violations.push_back({line_no, describe_violations(validation)});
      continue;
    }
    if (!seen_ids.insert(record.id).second) {
      result.violations.push_back({line_no, "duplicate id '" + record.id + "'"});
      continue;
    }
    result.records.push_back(std::move(record));
  }

  if (result.total_rows == 0) {
    result.warnings.push_back(std::string(source) + ": dataset is empty");
    spdlog::warn("{}: dataset is empty", source);
  }
  if (result.total_rows > 0) {
    double malformed = static_cast<double>(result.violations.size()) /
                       static_cast<double>(result.total_rows);
    if (malformed > kMaxMalformedFraction) {
      std::ostringstream msg;
      msg << source << ": " << result.violations.size() << " of " << result.total_rows
          << " lines malformed (limit 10%)";
      if (!result.violations.empty()) {
        msg << "; first at line " << result.violations.front().line << ": "
            << result.violations.front().message;
      }
      throw DatasetError(msg.str());
    }
  }
  return result;
}

LoadResult load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("error reading dataset '" + path.string() + "'");
  return parse_jsonl(buffer.str(), path.string());
}

std::string to_jsonl(const std::vector<EvalRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    json row{{"id", r.id},
             {"system_prompt", r.system_prompt},
             {"question", r.question},
             {"response", r.baseline_response}};
    out += row.dump();
    out += '\n';
  }
  return out;
}

void write(const std::filesystem::path& path, const std::vector<EvalRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write dataset '" + path.string() + "'");
  out << to_jsonl(records);
  if (!out) throw IoError("error writing dataset '" + path.string() + "'");
}

const std::vector<std::string>& default_math_rules() {
  static const std::vector<std::string> rules = {
      R"(\bsolve\b)",
      R"(\bcalculate\b)",
      R"(\bcompute\b)",
      R"(\bequation)",
      R"(\bhow (many|much)\b)",
      R"(\b(sum|product|difference|quotient|remainder) of\b)",
      R"(\bpercent(age)?\b|%)",
      R"(\d+\s*([-+*/^=]|×|÷)\s*\d+)",
      R"(\b[a-z]\s*[-+*/^]\s*\d|\d\s*[a-z]\s*[-+=])",
      R"(\b(math|arithmetic|algebra|fraction|integer|divisible|prime number)\b)",
  };
  return rules;
}

std::vector<EvalRecord> filter_category(const std::vector<EvalRecord>& records,
                                        const std::vector<std::string>& keyword_rules) {
  if (keyword_rules.empty()) throw ConfigError("category filter needs at least one rule");
  std::vector<std::regex> compiled;
  compiled.reserve(keyword_rules.size());
  for (const auto& rule : keyword_rules) {
    try {
      compiled.emplace_back(rule, std::regex::ECMAScript | std::regex::icase);
    } catch (const std::regex_error& e) {
      throw ConfigError("invalid category rule '" + rule + "': " + e.what());
    }
  }
  std::vector<EvalRecord> kept;
  for (const auto& record : records) {
    for (const auto& re : compiled) {
      if (std::regex_search(record.question, re)) {
        kept.push_back(record);
        break;
      }
    }
  }
  return kept;
}

std::vector<EvalRecord> sample(const std::vector<EvalRecord>& records, std::size_t k,
                               std::uint64_t seed) {
  std::vector<std::size_t> index(records.size());
  for (std::size_t i = 0; i < index.size(); ++i) index[i] = i;
  const std::size_t take = std::min(k, records.size());
  SplitMix64 rng{seed};
  for (std::size_t i = 0; i < take; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(index.size() - i));
    std::swap(index[i], index[j]);
  }
  std::vector<EvalRecord> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(records[index[i]]);
  return out;
}

void to_json(json& j, const DatasetManifest& m) {
  j = json{{"source_path", m.source_path},
           {"total_rows", m.total_rows},
           {"selected_ids", m.selected_ids},
           {"category_filter", m.category_filter},
           {"sample_seed", m.sample_seed}};
}

void from_json(const json& j, DatasetManifest& m) {
  j.at("source_path").get_to(m.source_path);
  j.at("total_rows").get_to(m.total_rows);
  j.at("selected_ids").get_to(m.selected_ids);
  j.at("category_filter").get_to(m.category_filter);
  j.at("sample_seed").get_to(m.sample_seed);
}

}  // namespace bell::dataset
