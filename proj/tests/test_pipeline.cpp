#include <gtest/gtest.h>

#include "bell/errors.hpp"
#include "bell/pipeline.hpp"
#include "support.hpp"

namespace bell::pipeline {
namespace {

using bell::testing::read_text;
using bell::testing::TempDir;
using bell::testing::write_text;

/// Fixture config in a scratch directory, with `patch` merged on top.
RunConfig fixture_config(const TempDir& dir, const json& patch = json::object()) {
  bell::testing::copy_fixture(dir.path());
  json j = json::parse(read_text(dir / "run.json"));
  j.merge_patch(patch);
  write_text(dir / "run.json", j.dump(2));
  return load_config(dir / "run.json");
}

TEST(Config, MalformedJsonIsPositioned) {
  try {
    parse_config("{\n  \"dataset\": {\n    \"path\": \"x\",,\n", ".");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Config, MissingJudgeIsNamed) {
  TempDir dir;
  bell::testing::copy_fixture(dir.path());
  json j = json::parse(read_text(dir / "run.json"));
  j.erase("judge");
  try {
    parse_config(j.dump(), dir.path());
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("judge"), std::string::npos) << e.what();
  }
  j["judge"] = "ghost";
  try {
    parse_config(j.dump(), dir.path());
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("'ghost'"), std::string::npos) << e.what();
  }
}

TEST(Config, UnknownSettingAndBadTechnique) {
  TempDir dir;
  bell::testing::copy_fixture(dir.path());
  json j = json::parse(read_text(dir / "run.json"));
  j["wrokers"] = 2;
  EXPECT_THROW(parse_config(j.dump(), dir.path()), ConfigError);
  j.erase("wrokers");
  j["techniques"] = {"cot", "tot"};
  EXPECT_THROW(parse_config(j.dump(), dir.path()), ConfigError);
}

TEST(Config, RelativePathsResolveAgainstConfigDir) {
  TempDir dir;
  auto c = fixture_config(dir);
  EXPECT_EQ(std::filesystem::path(c.dataset.path), (dir / "fixture5.jsonl").lexically_normal());
  EXPECT_EQ(std::filesystem::path(c.profile("model").script_path), (dir / "model_script.json").lexically_normal());
}

TEST(Config, HashIgnoresOperationalSettings) {
  TempDir dir;
  auto a = fixture_config(dir);
  auto b = a;
  b.workers = 9;
  b.profiles[0].max_concurrency = 1;
  b.profiles[0].timeout_s = 5;
  b.cache_dir = "/elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.profiles[0].temperature = 0.7;
  EXPECT_NE(config_hash(a), config_hash(b));
  auto changed = changed_settings(determinism_settings(a), determinism_settings(b));
  EXPECT_EQ(changed, (std::vector<std::string>{"model.temperature"}));
}

TEST(Config, ShippedExamplesParse) {
  for (const char* name : {"openai_example.json", "ollama_example.json"}) {
    auto c = load_config(std::filesystem::path(BELL_SOURCE_DIR) / "configs" / name);
    EXPECT_FALSE(c.techniques.empty()) << name;
    for (const auto& p : c.profiles) EXPECT_TRUE(validate_profile(p).ok()) << name;
  }
}

TEST(PathComponent, Encoding) {
  EXPECT_EQ(path_component("niv.1"), "niv.1");
  EXPECT_EQ(path_component("a/b c"), "a%2Fb%20c");
  EXPECT_EQ(path_component(".."), "%2E.");
}

json two_techniques() { return {{"techniques", {"cot", "cove"}}, {"hallucination", false}}; }

TEST(Run, CountsTasksAndColumns) {
  TempDir dir;
  auto config = fixture_config(dir, two_techniques());
  auto r = run(config);
  std::size_t done = 0;
  for (const auto& [id, rec] : r.manifest.records) {
    for (const auto& [task, s] : rec.tasks) done += s == Status::Done;
  }
  EXPECT_EQ(done, 10u);
  EXPECT_EQ(r.manifest.state, "complete");
  ASSERT_TRUE(r.scorecard);
  EXPECT_EQ(r.scorecard->per_technique.size(), 2u);
  EXPECT_FALSE(r.scorecard->model_score);
  EXPECT_EQ(r.scorecard->n_records, 5u);
  EXPECT_TRUE(std::filesystem::exists(transcript_path(r.run_dir, "m1", "cove")));
  auto manifest = read_manifest(r.run_dir / "manifest.json");
  EXPECT_EQ(manifest.config_hash, config_hash(config));
  EXPECT_TRUE(manifest.prompts.at("templates").contains("cot"));
}

TEST(Run, WarmCacheIsByteIdenticalWithoutCalls) {
  TempDir dir;
  auto config = fixture_config(dir, two_techniques());
  auto first = run(config);
  EXPECT_GT(first.backend_calls, 0u);
  const auto json1 = read_text(first.run_dir / "scorecard.json");
  const auto csv1 = read_text(first.run_dir / "scorecard.csv");
  auto second = run(config);
  EXPECT_EQ(second.backend_calls, 0u);
  EXPECT_EQ(read_text(second.run_dir / "scorecard.json"), json1);
  EXPECT_EQ(read_text(second.run_dir / "scorecard.csv"), csv1);
}

TEST(Resume, InterruptedRunMatchesUninterrupted) {
  TempDir a;
  TempDir b;
  auto full = run(fixture_config(a, two_techniques()));

  auto config = fixture_config(b, json{{"techniques", {"cot", "cove"}}, {"hallucination", false}, {"workers", 1}});
  RunOptions stop;
  stop.stop_after_tasks = 6;
  auto partial = run(config, stop);
  EXPECT_EQ(partial.tasks_executed, 6u);
  EXPECT_FALSE(partial.scorecard);
  EXPECT_EQ(partial.manifest.state, "interrupted");
  EXPECT_EQ(partial.manifest.count(Status::Done), 3u);
  EXPECT_FALSE(std::filesystem::exists(b / "runs/fixture/scorecard.json"));

  auto resumed = resume(config);
  EXPECT_EQ(resumed.tasks_executed, 4u);
  EXPECT_EQ(resumed.manifest.state, "complete");
  EXPECT_EQ(read_text(b / "runs/fixture/scorecard.json"), read_text(full.run_dir / "scorecard.json"));
  EXPECT_EQ(read_text(b / "runs/fixture/scorecard.csv"), read_text(full.run_dir / "scorecard.csv"));
}

TEST(Resume, CompleteRunExecutesNothing) {
  TempDir dir;
  auto config = fixture_config(dir, two_techniques());
  auto first = run(config);
  auto again = resume(config);
  EXPECT_EQ(again.tasks_executed, 0u);
  EXPECT_EQ(again.backend_calls, 0u);
  EXPECT_EQ(*again.scorecard, *first.scorecard);
}

TEST(Resume, OnlyFailedRecordIsRerun) {
  TempDir dir;
  auto config = fixture_config(dir, two_techniques());
  auto first = run(config);
  auto manifest = read_manifest(first.run_dir / "manifest.json");
  manifest.records.at("m3").status = Status::Failed;
  manifest.records.at("m3").tasks.at("cove") = Status::Failed;
  write_atomic(first.run_dir / "manifest.json", json(manifest).dump(2));
  auto again = resume(config);
  EXPECT_EQ(again.tasks_executed, 1u);
  EXPECT_EQ(again.manifest.records.at("m3").status, Status::Done);
}

TEST(Resume, ChangedTemperatureIsRefused) {
  TempDir dir;
  auto config = fixture_config(dir, two_techniques());
  run(config);
  auto changed = config;
  for (auto& p : changed.profiles) {
    if (p.name == "model") p.temperature = 0.5;
  }
  try {
    resume(changed);
    FAIL();
  } catch (const ResumeMismatchError& e) {
    EXPECT_NE(std::string(e.what()).find("temperature"), std::string::npos);
    EXPECT_EQ(e.changed(), (std::vector<std::string>{"model.temperature"}));
  }
}

TEST(Resume, NoManifestIsAnError) {
  TempDir dir;
  auto config = fixture_config(dir, two_techniques());
  EXPECT_THROW(resume(config), IoError);
}

TEST(Run, AllTechniquesProduceModelScore) {
  TempDir dir;
  auto r = run(fixture_config(dir));
  ASSERT_TRUE(r.scorecard);
  EXPECT_EQ(r.scorecard->per_technique.size(), 7u);
  ASSERT_TRUE(r.scorecard->hallucination_pct);
  ASSERT_TRUE(r.scorecard->model_score);
  EXPECT_EQ(r.manifest.records.at("m1").tasks.size(), 8u);
  EXPECT_EQ(r.aggregates.size(), 7u);
}

}  // namespace
}  // namespace bell::pipeline
