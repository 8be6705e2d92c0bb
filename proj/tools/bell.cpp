// Command-line entry point: run, resume, report, score, validate-dataset.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "bell/commands.hpp"

int main(int argc, char** argv) {
  using namespace bell::commands;

  CLI::App app{"bell: explainability benchmark for language models"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  std::string config_path;
  RunOverrides overrides;
  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "Run config (JSON)")->required();
    sub->add_option("--out", overrides.out, "Output directory");
    sub->add_option("--techniques", overrides.techniques, "Comma list of techniques");
    sub->add_option("--sample", overrides.sample, "Number of records to sample");
    sub->add_option("--seed", overrides.seed, "Sampling seed");
    sub->add_option("--mode", overrides.mode, "Aggregation mode")
        ->check(CLI::IsMember({"printed", "mean"}));
  };

  auto* run = app.add_subcommand("run", "Run the benchmark");
  add_run_flags(run);
  auto* resume = app.add_subcommand("resume", "Resume an interrupted run");
  add_run_flags(resume);

  std::string run_dir;
  std::string format = "md";
  std::string out_path;
  auto* report = app.add_subcommand("report", "Emit the scorecard of a finished run");
  report->add_option("run_dir", run_dir, "Run directory")->required();
  report->add_option("--format", format, "csv, json, md or chart")
      ->check(CLI::IsMember({"csv", "json", "md", "chart"}));
  report->add_option("--out", out_path, "Output file (chart: directory)");

  std::string table;
  auto* score = app.add_subcommand("score", "Recompute model_score for a scorecard CSV");
  score->add_option("table", table, "CSV with the scorecard columns")->required();

  std::string dataset;
  auto* validate = app.add_subcommand("validate-dataset", "Check a JSONL dataset");
  validate->add_option("path", dataset, "Dataset file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitFatal;
  }
  spdlog::set_default_logger(spdlog::stderr_color_mt("bell"));
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

  if (run->parsed()) return cmd_run(config_path, overrides, std::cout, std::cerr);
  if (resume->parsed()) return cmd_resume(config_path, overrides, std::cout, std::cerr);
  if (report->parsed()) return cmd_report(run_dir, format, out_path, std::cout, std::cerr);
  if (score->parsed()) return cmd_score(table, std::cout, std::cerr);
  if (validate->parsed()) return cmd_validate_dataset(dataset, std::cout, std::cerr);
  return kExitFatal;
}
