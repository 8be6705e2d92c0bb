#include <sstream>

#include <gtest/gtest.h>

#include "bell/commands.hpp"
#include "bell/errors.hpp"
#include "bell/report.hpp"
#include "support.hpp"

namespace bell::commands {
namespace {

using bell::testing::read_text;
using bell::testing::TempDir;
using bell::testing::write_text;

std::filesystem::path prepare(const TempDir& dir, const json& patch = json::object()) {
  bell::testing::copy_fixture(dir.path());
  json j = json::parse(read_text(dir / "run.json"));
  j.merge_patch(patch);
  write_text(dir / "run.json", j.dump(2));
  return dir / "run.json";
}

TEST(CmdRun, HappyPathPrintsScorecard) {
  TempDir dir;
  std::ostringstream out, err;
  EXPECT_EQ(cmd_run(prepare(dir), {}, out, err), kExitOk) << err.str();
  EXPECT_NE(out.str().find("| scripted-model |"), std::string::npos);
  EXPECT_NE(out.str().find("backend calls: "), std::string::npos);
}

TEST(CmdRun, MissingJudgeIsFatal) {
  TempDir dir;
  auto path = prepare(dir);
  json j = json::parse(read_text(path));
  j.erase("judge");
  write_text(path, j.dump());
  std::ostringstream out, err;
  EXPECT_EQ(cmd_run(path, {}, out, err), kExitFatal);
  EXPECT_NE(err.str().find("judge"), std::string::npos);
}

TEST(CmdRun, MalformedConfigIsFatalWithPosition) {
  TempDir dir;
  write_text(dir / "bad.json", "{\n\"dataset\": [\n");
  std::ostringstream out, err;
  EXPECT_EQ(cmd_run(dir / "bad.json", {}, out, err), kExitFatal);
  EXPECT_NE(err.str().find("line "), std::string::npos);
}

json remote_model() {
  return {{"profiles",
           {{{"name", "model"},
             {"kind", "openai"},
             {"base_url", "http://fake/v1"},
             {"model_id", "remote-model"},
             {"max_retries", 0}},
            {{"name", "judge"}, {"kind", "scripted"}, {"model_id", "scripted-judge"}, {"script_path", "judge_script.json"}},
            {{"name", "embedder"}, {"kind", "hash"}, {"model_id", "hash-embed"}, {"embedding_dim", 256}}}},
          {"techniques", {"cot", "thot"}}};
}

TEST(CmdRun, OneFailingRecordIsPartial) {
  TempDir dir;
  auto transport = std::make_shared<bell::testing::FunctionTransport>([](const std::string&, const json& body) {
    const std::string text = body.dump();
    if (text.find("12 * 3") != std::string::npos) return HttpResult{400, "rejected", ""};
    return HttpResult{200, bell::testing::chat_completion_body("The answer follows from 3 + 4."), ""};
  });
  pipeline::RunOptions options;
  options.transport = transport;
  std::ostringstream out, err;
  EXPECT_EQ(cmd_run(prepare(dir, remote_model()), {}, out, err, options), kExitPartial) << err.str();
  EXPECT_NE(out.str().find("failed: m2"), std::string::npos) << out.str();
  auto manifest = pipeline::read_manifest(dir / "runs/fixture/manifest.json");
  EXPECT_EQ(manifest.state, "partial");
  EXPECT_EQ(manifest.records.at("m2").status, pipeline::Status::Failed);
  EXPECT_EQ(manifest.count(pipeline::Status::Done), 4u);
}

TEST(CmdRun, AuthFailureAbortsTheRun) {
  TempDir dir;
  auto transport = std::make_shared<bell::testing::FunctionTransport>(
      [](const std::string&, const json&) { return HttpResult{401, "bad key", ""}; });
  pipeline::RunOptions options;
  options.transport = transport;
  std::ostringstream out, err;
  EXPECT_EQ(cmd_run(prepare(dir, remote_model()), {}, out, err, options), kExitFatal);
  EXPECT_NE(err.str().find("authentication"), std::string::npos) << err.str();
  EXPECT_LE(transport->calls(), 4);
  EXPECT_EQ(pipeline::read_manifest(dir / "runs/fixture/manifest.json").state, "aborted");
}

TEST(CmdRun, OverridesApply) {
  TempDir dir;
  RunOverrides o;
  o.techniques = "cot, thot";
  o.sample = 2;
  o.seed = 11;
  o.mode = "mean";
  o.out = (dir / "custom").string();
  std::ostringstream out, err;
  EXPECT_EQ(cmd_run(prepare(dir), o, out, err), kExitOk) << err.str();
  auto manifest = pipeline::read_manifest(dir / "custom/manifest.json");
  EXPECT_EQ(manifest.records.size(), 2u);
  EXPECT_EQ(manifest.settings.at("mode"), "mean");
  EXPECT_EQ(manifest.settings.at("techniques"), json({"cot", "thot"}));
}

TEST(CmdResume, AfterInterruption) {
  TempDir dir;
  auto path = prepare(dir, {{"techniques", {"cot"}}, {"workers", 1}});
  pipeline::RunOptions stop;
  stop.stop_after_tasks = 3;
  std::ostringstream out, err;
  EXPECT_EQ(cmd_run(path, {}, out, err, stop), kExitPartial);
  EXPECT_NE(out.str().find("interrupted"), std::string::npos);
  std::ostringstream out2, err2;
  EXPECT_EQ(cmd_report(dir / "runs/fixture", "csv", {}, out2, err2), kExitPartial);
  EXPECT_NE(err2.str().find("pending"), std::string::npos);
  std::ostringstream out3, err3;
  EXPECT_EQ(cmd_resume(path, {}, out3, err3), kExitOk) << err3.str();
}

TEST(CmdReport, FormatsAndCharts) {
  TempDir dir;
  std::ostringstream sink, err;
  ASSERT_EQ(cmd_run(prepare(dir), {}, sink, err), kExitOk);
  const auto run_dir = dir / "runs/fixture";
  std::ostringstream csv;
  EXPECT_EQ(cmd_report(run_dir, "csv", {}, csv, err), kExitOk);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), report::kCsvHeader);
  EXPECT_EQ(csv.str(), read_text(run_dir / "scorecard.csv"));
  std::ostringstream js;
  EXPECT_EQ(cmd_report(run_dir, "json", {}, js, err), kExitOk);
  EXPECT_EQ(js.str(), read_text(run_dir / "scorecard.json"));

  std::ostringstream chart;
  EXPECT_EQ(cmd_report(run_dir, "chart", dir / "charts", chart, err), kExitOk);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "charts")) {
    ++files;
    auto series = json::parse(read_text(e.path()));
    EXPECT_EQ(series.at("labels").size(), series.at("values").size());
  }
  EXPECT_EQ(files, 1u);

  EXPECT_EQ(cmd_report(run_dir, "md", dir / "a.md", sink, err), kExitOk);
  EXPECT_EQ(cmd_report(run_dir, "md", dir / "b.md", sink, err), kExitOk);
  EXPECT_EQ(read_text(dir / "a.md"), read_text(dir / "b.md"));
}

TEST(CmdReport, MissingManifestIsFatal) {
  TempDir dir;
  std::ostringstream out, err;
  EXPECT_EQ(cmd_report(dir.path(), "csv", {}, out, err), kExitFatal);
}

TEST(CmdScore, ReproducesTableAndFlagsAnomaly) {
  std::ostringstream out, err;
  EXPECT_EQ(cmd_score(bell::testing::data_dir() / "reference_table.csv", out, err), kExitOk);
  auto rows = report::read_score_table(out.str());
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(*rows[0].printed_model_score, 87.78);
  EXPECT_EQ(*rows[6].printed_model_score, 76.55);
  EXPECT_NE(err.str().find("Nemotron"), std::string::npos);
  EXPECT_EQ(err.str().find("Gemma"), std::string::npos);
}

TEST(CmdScore, ZerosAndMalformed) {
  TempDir dir;
  write_text(dir / "z.csv", "model,cot,thot,reread_cot,reread_thot,cove,hallucination\nz,0,0,0,0,0,100\n");
  std::ostringstream out, err;
  EXPECT_EQ(cmd_score(dir / "z.csv", out, err), kExitOk);
  EXPECT_NE(out.str().find("z,0.00,0.00,0.00,0.00,0.00,100.00,0.00"), std::string::npos);
  write_text(dir / "bad.csv", "model,cot,thot,reread_cot,reread_thot,cove,hallucination\nz,0,abc,0,0,0,100\n");
  std::ostringstream out2, err2;
  EXPECT_EQ(cmd_score(dir / "bad.csv", out2, err2), kExitFatal);
  EXPECT_NE(err2.str().find("row 1, column 'thot'"), std::string::npos) << err2.str();
}

TEST(CmdValidateDataset, ReportsLines) {
  TempDir dir;
  std::ostringstream out, err;
  EXPECT_EQ(cmd_validate_dataset(bell::testing::data_dir() / "fixture5.jsonl", out, err), kExitOk);
  std::string text;
  for (int i = 0; i < 12; ++i) text += R"({"id":"r)" + std::to_string(i) + R"(","question":"q","response":"a"})" "\n";
  text += R"({"id":"x","question":"q"})" "\n";
  write_text(dir / "d.jsonl", text);
  std::ostringstream out2, err2;
  EXPECT_EQ(cmd_validate_dataset(dir / "d.jsonl", out2, err2), kExitPartial);
  EXPECT_NE(out2.str().find("line 13:"), std::string::npos);
  std::ostringstream out3, err3;
  EXPECT_EQ(cmd_validate_dataset(dir / "missing.jsonl", out3, err3), kExitFatal);
}

}  // namespace
}  // namespace bell::commands
