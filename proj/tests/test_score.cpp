#include <gtest/gtest.h>

#include "bell/errors.hpp"
#include "bell/score.hpp"

namespace bell::score {
namespace {

MetricBundle bundle(std::string id, double coh, double unc, double cos) {
  MetricBundle b;
  b.record_id = std::move(id);
  b.coherence = coh;
  b.uncertainty = unc;
  b.cosine_similarity = cos;
  b.geval_submetrics = {{"relevance", 1.0}};
  b.hallucination = 0.1;
  return b;
}

TEST(PerRecord, PrintedAndMean) {
  auto b = bundle("a", 0.9, 0.2, 0.8);
  EXPECT_NEAR(per_record_score(b, AggregationMode::Printed).value, 0.9, 1e-12);
  EXPECT_NEAR(per_record_score(b, AggregationMode::Mean).value, (0.9 + 0.8 + 0.8) / 3, 1e-12);
}

TEST(PerRecord, EpsilonGuardAndCap) {
  auto r = per_record_score(bundle("a", 0.5, 0.0, 0.0), AggregationMode::Printed);
  EXPECT_EQ(r.value, 1.5);
  EXPECT_TRUE(r.epsilon_guarded);
  EXPECT_TRUE(r.capped);
  auto small = per_record_score(bundle("a", 0.0, 0.0, 0.0), AggregationMode::Printed);
  EXPECT_EQ(small.value, 0.0);
  EXPECT_TRUE(small.epsilon_guarded);
  EXPECT_FALSE(small.capped);
}

TEST(PerRecord, NegativeCosineCountsAsZero) {
  auto r = per_record_score(bundle("a", 0.6, 0.5, -0.4), AggregationMode::Printed);
  EXPECT_NEAR(r.value, 1.2, 1e-12);
  EXPECT_FALSE(r.epsilon_guarded);
}

TEST(PerRecord, PartialBundleIsRejected) {
  auto b = bundle("a", 0.5, 0.5, 0.5);
  b.unavailable = {"coherence"};
  EXPECT_THROW(per_record_score(b, AggregationMode::Printed), PreconditionError);
}

TEST(Overall, SingletonAndPair) {
  EXPECT_NEAR(overall_score({bundle("a", 0.9, 0.2, 0.8)}, AggregationMode::Printed).overall_score_pct, 90.0, 1e-9);
  auto agg = overall_score({bundle("b", 1.0, 0.5, 0.5), bundle("a", 0.8, 0.5, 0.5)}, AggregationMode::Printed);
  EXPECT_NEAR(agg.overall_score_pct, 90.0, 1e-9);
  EXPECT_EQ(agg.n_included, 2u);
}

TEST(Overall, PartialBundlesAreExcluded) {
  auto partial = bundle("b", 0.1, 0.5, 0.5);
  partial.unavailable = {"geval"};
  auto agg = overall_score({bundle("a", 0.9, 0.2, 0.8), partial}, AggregationMode::Printed);
  EXPECT_NEAR(agg.overall_score_pct, 90.0, 1e-9);
  EXPECT_EQ(agg.n_included, 1u);
  EXPECT_EQ(agg.n_excluded, 1u);
  EXPECT_THROW(overall_score({partial}, AggregationMode::Printed), EmptyAggregateError);
  EXPECT_THROW(overall_score({}, AggregationMode::Mean), EmptyAggregateError);
}

TEST(Overall, OrderIndependent) {
  std::vector<MetricBundle> bs;
  for (int i = 0; i < 30; ++i) bs.push_back(bundle("r" + std::to_string(i), 0.03 * i, 0.1 + 0.01 * i, 0.3));
  auto forward = overall_score(bs, AggregationMode::Printed).overall_score_pct;
  std::reverse(bs.begin(), bs.end());
  EXPECT_EQ(overall_score(bs, AggregationMode::Printed).overall_score_pct, forward);
}

TEST(Hallucination, Percentage) {
  auto a = bundle("a", 1, 0, 1);
  a.hallucination = 0.2;
  auto b = bundle("b", 1, 0, 1);
  b.hallucination = 0.4;
  EXPECT_NEAR(hallucination_pct({a, b}), 30.0, 1e-12);
}

std::map<TechniqueKind, double> five(double cot, double thot, double rc, double rt, double cove) {
  return {{TechniqueKind::Cot, cot},
          {TechniqueKind::Thot, thot},
          {TechniqueKind::ReReadCot, rc},
          {TechniqueKind::ReReadThot, rt},
          {TechniqueKind::Cove, cove}};
}

TEST(ModelScore, TableRows) {
  EXPECT_EQ(format_2dp(model_score(five(85.28, 92.39, 91.91, 91.37, 85.14), 19.42)), "87.78");
  EXPECT_EQ(format_2dp(model_score(five(76.95, 88.7, 88.76, 86.8, 82.21), 31.96)), "81.91");
}

TEST(ModelScore, FixedPointAndEndpoints) {
  EXPECT_NEAR(model_score(five(100, 100, 100, 100, 100), 0.0), 100.0, 1e-12);
  EXPECT_EQ(format_2dp(model_score(five(0, 0, 0, 0, 0), 100.0)), "0.00");
}

TEST(ModelScore, Preconditions) {
  auto m = five(1, 2, 3, 4, 5);
  m.erase(TechniqueKind::Cove);
  EXPECT_THROW(model_score(m, 10), IncompleteScorecardError);
  EXPECT_THROW(model_score(five(1, 2, 3, 4, 5), 120), PreconditionError);
  EXPECT_THROW(model_score(five(1, 2, 3, 4, 151), 10), PreconditionError);
  EXPECT_NO_THROW(model_score(five(1, 2, 3, 4, 150), 10));
}

TEST(Rounding, HalfUpDespiteBinaryError) {
  EXPECT_EQ(format_2dp(84.145), "84.15");
  EXPECT_EQ(format_2dp(0.125), "0.13");
  EXPECT_EQ(format_2dp(2.675), "2.68");
  EXPECT_EQ(format_2dp(-0.001), "0.00");
  EXPECT_EQ(round_half_up(76.766666, 2), 76.77);
}

TEST(Mode, Names) {
  EXPECT_EQ(parse_mode("printed"), AggregationMode::Printed);
  EXPECT_EQ(parse_mode("mean"), AggregationMode::Mean);
  EXPECT_THROW(parse_mode("median"), ConfigError);
}

}  // namespace
}  // namespace bell::score
