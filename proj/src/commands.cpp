#include "bell/commands.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "bell/errors.hpp"
#include "bell/report.hpp"

namespace bell::commands {

namespace fs = std::filesystem;

namespace {

constexpr double kAnomalyTolerance = 0.01 + 1e-9;

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto b = item.find_first_not_of(" \t");
    auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) parts.push_back(item.substr(b, e - b + 1));
  }
  return parts;
}

void print_summary(const pipeline::RunResult& r, std::ostream& out) {
  if (r.scorecard) out << report::to_markdown({*r.scorecard});
  out << "records: " << r.manifest.records.size() << " (done " << r.manifest.count(pipeline::Status::Done)
      << ", partial " << r.manifest.count(pipeline::Status::Partial) << ", failed "
      << r.manifest.count(pipeline::Status::Failed) << ")\n";
  out << "backend calls: " << r.backend_calls << "\n";
  for (const auto& id : r.failed_ids) out << "failed: " << id << "\n";
  if (r.manifest.pending_tasks() > 0) {
    out << "interrupted: " << r.manifest.pending_tasks() << " tasks pending\n";
  }
  out << "run directory: " << r.run_dir.string() << "\n";
}

int exit_code(const pipeline::RunResult& r) {
  if (r.manifest.state == "failed") return kExitFatal;
  if (!r.failed_ids.empty() || r.manifest.pending_tasks() > 0) return kExitPartial;
  return kExitOk;
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return kExitFatal;
}

}  // namespace

void apply_overrides(pipeline::RunConfig& config, const RunOverrides& o) {
  if (o.out) config.output_dir = *o.out;
  if (o.techniques) {
    config.techniques.clear();
    for (const auto& name : split_commas(*o.techniques)) config.techniques.push_back(parse_technique(name));
  }
  if (o.sample) config.dataset.sample = *o.sample;
  if (o.seed) config.dataset.seed = *o.seed;
  if (o.mode) config.mode = score::parse_mode(*o.mode);
  pipeline::validate_config(config);
}

int cmd_run(const fs::path& config_path, const RunOverrides& overrides, std::ostream& out,
            std::ostream& err, const pipeline::RunOptions& options) {
  return guarded(err, [&] {
    auto config = pipeline::load_config(config_path);
    apply_overrides(config, overrides);
    auto result = pipeline::run(config, options);
    print_summary(result, out);
    return exit_code(result);
  });
}

int cmd_resume(const fs::path& config_path, const RunOverrides& overrides, std::ostream& out,
               std::ostream& err, const pipeline::RunOptions& options) {
  return guarded(err, [&] {
    auto config = pipeline::load_config(config_path);
    apply_overrides(config, overrides);
    auto result = pipeline::resume(config, {}, options);
    print_summary(result, out);
    return exit_code(result);
  });
}

int cmd_report(const fs::path& run_dir, const std::string& format, const fs::path& out_path,
               std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const fs::path manifest_path = run_dir / "manifest.json";
    if (!fs::exists(manifest_path)) {
      err << "error: no manifest in " << run_dir.string() << "\n";
      return kExitFatal;
    }
    auto manifest = pipeline::read_manifest(manifest_path);
    if (manifest.pending_tasks() > 0) {
      err << "run is incomplete: " << manifest.pending_tasks() << " tasks pending across "
          << manifest.count(pipeline::Status::Pending) << " records\n";
      return kExitPartial;
    }
    const auto mode = score::parse_mode(manifest.settings.at("mode").get<std::string>());
    const auto model_id = manifest.settings.at("model").at("model_id").get<std::string>();
    auto agg = pipeline::aggregate_run(run_dir, manifest, model_id, mode);
    const Scorecard& card = *agg.scorecard;

    if (format == "chart") {
      fs::path dir = out_path.empty() ? run_dir / "charts" : out_path;
      fs::path file = dir / (pipeline::path_component(card.model_id) + ".json");
      pipeline::write_atomic(file, json(report::chart_series(card)).dump(2) + "\n");
      out << file.string() << "\n";
      return kExitOk;
    }
    std::string text;
    if (format == "csv") {
      text = report::to_csv({card});
    } else if (format == "json") {
      text = report::to_json_text(card);
    } else if (format == "md") {
      text = report::to_markdown({card});
    } else {
      err << "error: unknown format '" << format << "' (csv, json, md, chart)\n";
      return kExitFatal;
    }
    if (out_path.empty()) {
      out << text;
    } else {
      pipeline::write_atomic(out_path, text);
    }
    return kExitOk;
  });
}

int cmd_score(const fs::path& table_csv, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto rows = report::read_score_table(pipeline::read_file(table_csv));
    std::vector<Scorecard> cards;
    for (const auto& row : rows) {
      Scorecard card;
      card.model_id = row.model;
      card.per_technique = row.per_technique;
      card.hallucination_pct = row.hallucination_pct;
      try {
        card.model_score = score::model_score(row.per_technique, row.hallucination_pct);
      } catch (const Error& e) {
        throw ConfigError("row " + std::to_string(row.row) + ": " + e.what());
      }
      if (row.printed_model_score) {
        const double delta = score::round_half_up(*card.model_score) - *row.printed_model_score;
        if (std::abs(delta) > kAnomalyTolerance) {
          err << "anomaly: row " << row.row << " (" << row.model << "): computed "
              << score::format_2dp(*card.model_score) << ", printed "
              << score::format_2dp(*row.printed_model_score) << "\n";
        }
      }
      cards.push_back(std::move(card));
    }
    out << report::to_csv(cards);
    return kExitOk;
  });
}

int cmd_validate_dataset(const fs::path& path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto result = dataset::load(path);
    for (const auto& v : result.violations) out << "line " << v.line << ": " << v.message << "\n";
    for (const auto& w : result.warnings) err << "warning: " << w << "\n";
    out << result.records.size() << " valid of " << result.total_rows << " rows\n";
    return result.violations.empty() ? kExitOk : kExitPartial;
  });
}

}  // namespace bell::commands
