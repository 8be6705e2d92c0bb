#include <random>

#include <gtest/gtest.h>

#include "bell/core.hpp"
#include "bell/errors.hpp"

namespace bell {
namespace {

EvalRecord rec(std::string id, std::string q, std::string b) {
  return EvalRecord{std::move(id), "", std::move(q), std::move(b)};
}

TEST(ValidateRecord, WellFormedRecordIsOk) {
  EXPECT_TRUE(validate_record(rec("q1", "2+2?", "4")).ok());
}

TEST(ValidateRecord, EmptyIdIsReported) {
  auto v = validate_record(rec("", "2+2?", "4"));
  ASSERT_EQ(v.violations.size(), 1u);
  EXPECT_EQ(v.violations[0].field, "id");
}

TEST(ValidateRecord, EmptyBaselineIsReported) {
  auto v = validate_record(rec("q2", "x", ""));
  ASSERT_EQ(v.violations.size(), 1u);
  EXPECT_EQ(v.violations[0].field, "baseline_response");
}

TEST(ValidateRecord, WhitespaceCountsAsEmpty) {
  auto v = validate_record(rec("q3", " \t\n", "4"));
  ASSERT_EQ(v.violations.size(), 1u);
  EXPECT_EQ(v.violations[0].field, "question");
}

TEST(TechniqueNames, RoundTripAndRejectUnknown) {
  for (auto t : kAllTechniques) EXPECT_EQ(parse_technique(to_string(t)), t);
  EXPECT_THROW(parse_technique("CoT"), ConfigError);
  EXPECT_THROW(parse_technique("tot"), ConfigError);
  EXPECT_EQ(task_name(std::nullopt), "plain");
  EXPECT_EQ(parse_task_name("plain"), std::nullopt);
  EXPECT_EQ(parse_task_name("cove"), TechniqueKind::Cove);
}

TEST(Json, RecordRoundTrip) {
  json j = rec("niv.1", "2+2?", "4");
  EXPECT_EQ(j.at("baseline_response"), "4");
  EXPECT_EQ(j.get<EvalRecord>(), rec("niv.1", "2+2?", "4"));
}

ExplanationTranscript random_transcript(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n(1, 5);
  std::uniform_real_distribution<double> u(-5.0, 0.0);
  ExplanationTranscript t;
  t.record_id = "r" + std::to_string(rng() % 1000);
  if (rng() % 4 != 0) t.technique = kAllTechniques[rng() % kAllTechniques.size()];
  t.model_id = "m";
  t.temperature = 0.25 * static_cast<double>(rng() % 4);
  int steps = n(rng);
  for (int i = 0; i < steps; ++i) {
    TranscriptStep s;
    s.role = i % 2 ? Role::System : Role::Assistant;
    s.content = "step \"" + std::to_string(i) + "\"\n\xc3\xa9";
    s.stage_label = "stage:" + std::to_string(i);
    s.prompt = {{Role::System, "sys"}, {Role::User, "user " + std::to_string(i)}};
    if (rng() % 2) s.logprobs = std::vector<double>{u(rng), u(rng)};
    t.steps.push_back(s);
  }
  t.final_explanation = t.steps.back().content;
  if (rng() % 2) t.flags.push_back("cove_degenerate");
  if (rng() % 2) t.node_scores["s1"] = 7.0;
  return t;
}

TEST(Json, TranscriptRoundTripProperty) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    auto t = random_transcript(rng);
    auto back = json::parse(json(t).dump()).get<ExplanationTranscript>();
    EXPECT_EQ(back, t);
    EXPECT_EQ(json(back).dump(), json(t).dump());
  }
}

TEST(Json, BundleAndScorecardRoundTrip) {
  MetricBundle b;
  b.record_id = "a";
  b.technique = TechniqueKind::ReReadThot;
  b.coherence = 0.75;
  b.uncertainty = 0.1;
  b.cosine_similarity = -0.2;
  b.geval_submetrics = {{"fluency", 1.0}, {"relevance", 0.5}};
  b.hallucination = 0.3;
  b.unavailable = {"geval"};
  EXPECT_EQ(json(b).get<MetricBundle>(), b);
  EXPECT_FALSE(b.complete());

  Scorecard s;
  s.model_id = "gpt";
  s.per_technique = {{TechniqueKind::Cot, 85.28}, {TechniqueKind::Cove, 85.14}};
  s.hallucination_pct = 19.42;
  s.n_records = 3;
  json j = s;
  EXPECT_TRUE(j.at("model_score").is_null());
  EXPECT_EQ(j.at("per_technique").at("cot"), 85.28);
  EXPECT_EQ(j.get<Scorecard>(), s);
}

TEST(ValidateTranscript, DuplicateStageLabelsAndFinalMismatch) {
  ExplanationTranscript t;
  t.record_id = "r";
  t.steps = {{Role::Assistant, "a", "x", {}, {}}, {Role::Assistant, "b", "x", {}, {}}};
  t.final_explanation = "a";
  auto v = validate_transcript(t);
  EXPECT_GE(v.violations.size(), 2u);
  t.steps[1].stage_label = "y";
  t.final_explanation = "b";
  EXPECT_TRUE(validate_transcript(t).ok());
  t.steps.clear();
  EXPECT_FALSE(validate_transcript(t).ok());
}

TEST(ValidateBundle, RangesAreChecked) {
  MetricBundle b;
  b.record_id = "r";
  b.coherence = 1.2;
  b.cosine_similarity = 0.5;
  EXPECT_FALSE(validate_bundle(b).ok());
  b.coherence = 1.0;
  EXPECT_TRUE(validate_bundle(b).ok());
}

}  // namespace
}  // namespace bell
