#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bell/backend.hpp"
#include "bell/core.hpp"

namespace bell::metrics {

/// LLM-as-judge rubric. The judge's reply is searched with parse_pattern
/// (first capture group) and the integer mapped affinely onto [0,1].
struct JudgeRubric {
  std::string metric_name;
  std::string rubric_text;
  int scale_min = 1;
  int scale_max = 5;
  std::string parse_pattern = R"((-?\d+))";

  double normalize(int raw) const;

  friend bool operator==(const JudgeRubric&, const JudgeRubric&) = default;
};

void to_json(json& j, const JudgeRubric& r);
void from_json(const json& j, JudgeRubric& r);

JudgeRubric default_coherence_rubric();
JudgeRubric default_confidence_rubric();
/// relevance, consistency, fluency
std::vector<JudgeRubric> default_geval_rubrics();

enum class UncertaintyMode { Judge, Logprob };

struct MetricsConfig {
  JudgeRubric coherence = default_coherence_rubric();
  JudgeRubric confidence = default_confidence_rubric();
  std::vector<JudgeRubric> geval = default_geval_rubrics();
  UncertaintyMode uncertainty_mode = UncertaintyMode::Judge;

  friend bool operator==(const MetricsConfig&, const MetricsConfig&) = default;
};

void to_json(json& j, const MetricsConfig& c);
void from_json(const json& j, MetricsConfig& c);

/// Σ a_i·b_i / (‖a‖·‖b‖) in double precision. Throws PreconditionError on a
/// dimension mismatch and DegenerateEmbeddingError on a zero-norm input.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

/// 1 − 0.8·mean(submetrics) − 0.2·max(0, cos_sim), clamped to [0,1].
double hallucination(const std::map<std::string, double>& submetrics, double cos_sim);

/// Integer score in a judge reply, or nullopt if none within the scale.
std::optional<int> parse_judge_score(const JudgeRubric& rubric, std::string_view reply);

ChatRequest judge_request(const JudgeRubric& rubric, const std::string& question,
                          const std::string& explanation, bool retry);

/// Asks the judge once, and once more with a format reminder if the reply
/// does not parse. Throws MetricUnavailableError after the second failure.
double judge_metric(Backend& backend, const BackendProfile& judge, const JudgeRubric& rubric,
                    const ExplanationTranscript& transcript, const EvalRecord& record);

double coherence(Backend& backend, const BackendProfile& judge,
                 const ExplanationTranscript& transcript, const EvalRecord& record,
                 const MetricsConfig& config = {});

/// Judge mode: 1 − normalized confidence. Logprob mode (when the final step
/// carries token logprobs): min(1, mean(−logprob) / ln 50257).
double uncertainty(Backend& backend, const BackendProfile& judge,
                   const ExplanationTranscript& transcript, const EvalRecord& record,
                   const MetricsConfig& config = {});

double logprob_uncertainty(const std::vector<double>& token_logprobs);

std::map<std::string, double> geval_submetrics(Backend& backend, const BackendProfile& judge,
                                               const ExplanationTranscript& transcript,
                                               const EvalRecord& record,
                                               const MetricsConfig& config = {});

struct MetricProfiles {
  BackendProfile judge;
  BackendProfile embedder;
};

/// Full metric suite for one transcript. Metrics that fail (judge parse
/// failures, exhausted retries, degenerate embeddings) are listed in
/// MetricBundle::unavailable. Authentication and configuration errors
/// propagate.
MetricBundle score_explanation(Backend& backend, const MetricProfiles& profiles,
                               const ExplanationTranscript& transcript, const EvalRecord& record,
                               const MetricsConfig& config = {});

}  // namespace bell::metrics
