#include "bell/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <regex>

#include <spdlog/spdlog.h>

#include "bell/errors.hpp"

namespace bell::metrics {

double JudgeRubric::normalize(int raw) const {
  return static_cast<double>(raw - scale_min) / static_cast<double>(scale_max - scale_min);
}

void to_json(json& j, const JudgeRubric& r) {
  j = json{{"metric_name", r.metric_name},
           {"rubric_text", r.rubric_text},
           {"scale_min", r.scale_min},
           {"scale_max", r.scale_max},
           {"parse_pattern", r.parse_pattern}};
}

void from_json(const json& j, JudgeRubric& r) {
  JudgeRubric d;
  j.at("metric_name").get_to(r.metric_name);
  j.at("rubric_text").get_to(r.rubric_text);
  r.scale_min = j.value("scale_min", d.scale_min);
  r.scale_max = j.value("scale_max", d.scale_max);
  r.parse_pattern = j.value("parse_pattern", d.parse_pattern);
  if (r.scale_min >= r.scale_max) {
    throw ConfigError("rubric '" + r.metric_name + "': scale_min must be < scale_max");
  }
  try {
    std::regex check(r.parse_pattern);
    if (check.mark_count() < 1) throw ConfigError("rubric '" + r.metric_name + "': parse_pattern needs a capture group");
  } catch (const std::regex_error& e) {
    throw ConfigError("rubric '" + r.metric_name + "': invalid parse_pattern: " + e.what());
  }
}

JudgeRubric default_coherence_rubric() {
  return {"coherence",
          "You will be given a question and an explanation written in answer to it. Rate the "
          "COHERENCE of the explanation on a scale of 1 to 5: how logically consistent it is, "
          "whether each step follows from the previous ones, and whether it stays aligned with "
          "the question. 1 = incoherent or contradictory, 3 = partly structured with gaps, "
          "5 = fully consistent, well structured and on topic.",
          1, 5, R"((-?\d+))"};
}

JudgeRubric default_confidence_rubric() {
  return {"confidence",
          "You will be given a question and an explanation written in answer to it. Rate the "
          "CONFIDENCE expressed by the explanation on a scale of 1 to 5: how certain and "
          "unambiguous its conclusion is. 1 = hedged, vague or self-contradicting, 3 = "
          "moderately certain, 5 = clear, definite and fully committed.",
          1, 5, R"((-?\d+))"};
}

std::vector<JudgeRubric> default_geval_rubrics() {
  return {
      {"relevance",
       "You will be given a question and an explanation written in answer to it. Rate the "
       "RELEVANCE of the explanation on a scale of 1 to 5: whether it addresses what the "
       "question asks and contains only information needed to answer it. 1 = off topic, "
       "5 = entirely relevant.",
       1, 5, R"((-?\d+))"},
      {"consistency",
       "You will be given a question and an explanation written in answer to it. Rate the "
       "CONSISTENCY of the explanation on a scale of 1 to 5: whether it is faithful to the facts "
       "stated in the question and introduces no unsupported or fabricated facts. 1 = many "
       "fabricated or contradicting facts, 5 = fully faithful.",
       1, 5, R"((-?\d+))"},
      {"fluency",
       "You will be given a question and an explanation written in answer to it. Rate the "
       "FLUENCY of the explanation on a scale of 1 to 5: grammar, spelling and readability. "
       "1 = hard to read, 5 = fluent and well written.",
       1, 5, R"((-?\d+))"},
  };
}

void to_json(json& j, const MetricsConfig& c) {
  j = json{{"coherence", c.coherence},
           {"confidence", c.confidence},
           {"geval", c.geval},
           {"uncertainty_mode", c.uncertainty_mode == UncertaintyMode::Judge ? "judge" : "logprob"}};
}

void from_json(const json& j, MetricsConfig& c) {
  MetricsConfig d;
  c.coherence = j.contains("coherence") ? j.at("coherence").get<JudgeRubric>() : d.coherence;
  c.confidence = j.contains("confidence") ? j.at("confidence").get<JudgeRubric>() : d.confidence;
  c.geval = j.contains("geval") ? j.at("geval").get<std::vector<JudgeRubric>>() : d.geval;
  if (c.geval.empty()) throw ConfigError("at least one G-Eval rubric is required");
  std::string mode = j.value("uncertainty_mode", std::string("judge"));
  if (mode == "judge") {
    c.uncertainty_mode = UncertaintyMode::Judge;
  } else if (mode == "logprob") {
    c.uncertainty_mode = UncertaintyMode::Logprob;
  } else {
    throw ConfigError("uncertainty_mode must be judge or logprob, not '" + mode + "'");
  }
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension()) {
    throw PreconditionError("cosine similarity: dimension mismatch (" +
                            std::to_string(a.dimension()) + " vs " +
                            std::to_string(b.dimension()) + ")");
  }
  // Power-of-two rescaling is exact and keeps the squares in range.
  auto unit_scale = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    int e = 0;
    std::frexp(m, &e);
    return m > 0.0 ? std::ldexp(1.0, -e) : 1.0;
  };
  const double sa = unit_scale(a.values);
  const double sb = unit_scale(b.values);
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.dimension(); ++i) {
    const double x = a.values[i] * sa;
    const double y = b.values[i] * sb;
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  if (na == 0.0 || nb == 0.0) throw DegenerateEmbeddingError("cosine similarity of a zero vector");
  // sqrt(na·nb) is exact for a == b; fall back when the product leaves range.
  double denom = na * nb;
  denom = (std::isfinite(denom) && denom > 0.0) ? std::sqrt(denom) : std::sqrt(na) * std::sqrt(nb);
  return std::clamp(dot / denom, -1.0, 1.0);
}

double hallucination(const std::map<std::string, double>& submetrics, double cos_sim) {
  if (submetrics.empty()) throw PreconditionError("hallucination needs at least one submetric");
  double sum = 0.0;
  for (const auto& [name, v] : submetrics) {
    if (!(v >= 0.0 && v <= 1.0)) throw PreconditionError("submetric " + name + " outside [0,1]");
    sum += v;
  }
  const double mean = sum / static_cast<double>(submetrics.size());
  const double raw = 1.0 - 0.8 * mean - 0.2 * std::max(0.0, cos_sim);
  const double clamped = std::clamp(raw, 0.0, 1.0);
  if (clamped != raw) spdlog::debug("hallucination clamped from {} to {}", raw, clamped);
  return clamped;
}

std::optional<int> parse_judge_score(const JudgeRubric& rubric, std::string_view reply) {
  std::regex re(rubric.parse_pattern);
  std::string text(reply);
  std::smatch m;
  if (!std::regex_search(text, m, re) || m.size() < 2) return std::nullopt;
  const std::string digits = m[1].str();
  if (digits.empty() || digits.size() > 6) return std::nullopt;
  int v = 0;
  try {
    v = std::stoi(digits);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (v < rubric.scale_min || v > rubric.scale_max) return std::nullopt;
  return v;
}

ChatRequest judge_request(const JudgeRubric& rubric, const std::string& question,
                          const std::string& explanation, bool retry) {
  const std::string range =
      std::to_string(rubric.scale_min) + " to " + std::to_string(rubric.scale_max);
  std::string user = "Question:\n" + question + "\n\nExplanation:\n" + explanation +
                     "\n\nReply with a single integer from " + range + ".";
  if (retry) {
    user += "\n\nYour previous reply could not be read. Reply with only the integer score (" +
            range + ") and no other text.";
  }
  ChatRequest r;
  r.messages = {{Role::System, rubric.rubric_text}, {Role::User, std::move(user)}};
  return r;
}

double judge_metric(Backend& backend, const BackendProfile& judge, const JudgeRubric& rubric,
                    const ExplanationTranscript& transcript, const EvalRecord& record) {
  for (bool retry : {false, true}) {
    ChatRequest request = judge_request(rubric, record.question, transcript.final_explanation, retry);
    request.temperature = judge.temperature;
    ChatResponse response = backend.chat(judge, request);
    if (auto score = parse_judge_score(rubric, response.content)) return rubric.normalize(*score);
    spdlog::debug("{}: unparseable judge reply for record {}: '{}'", rubric.metric_name,
                  record.id, response.content.substr(0, 80));
  }
  throw MetricUnavailableError(rubric.metric_name, rubric.metric_name +
                                                       ": judge reply unparseable twice for record " +
                                                       record.id);
}

double coherence(Backend& backend, const BackendProfile& judge,
                 const ExplanationTranscript& transcript, const EvalRecord& record,
                 const MetricsConfig& config) {
  return judge_metric(backend, judge, config.coherence, transcript, record);
}

double logprob_uncertainty(const std::vector<double>& token_logprobs) {
  if (token_logprobs.empty()) throw PreconditionError("logprob uncertainty needs tokens");
  double sum = 0.0;
  for (double lp : token_logprobs) sum += -lp;
  const double mean = sum / static_cast<double>(token_logprobs.size());
  return std::clamp(mean / std::log(50257.0), 0.0, 1.0);
}

double uncertainty(Backend& backend, const BackendProfile& judge,
                   const ExplanationTranscript& transcript, const EvalRecord& record,
                   const MetricsConfig& config) {
  if (config.uncertainty_mode == UncertaintyMode::Logprob) {
    for (auto it = transcript.steps.rbegin(); it != transcript.steps.rend(); ++it) {
      if (it->role != Role::Assistant) continue;
      if (it->logprobs && !it->logprobs->empty()) return logprob_uncertainty(*it->logprobs);
      break;
    }
    spdlog::debug("record {}: no token logprobs, using judge confidence", record.id);
  }
  return 1.0 - judge_metric(backend, judge, config.confidence, transcript, record);
}

std::map<std::string, double> geval_submetrics(Backend& backend, const BackendProfile& judge,
                                               const ExplanationTranscript& transcript,
                                               const EvalRecord& record,
                                               const MetricsConfig& config) {
  std::map<std::string, double> out;
  for (const auto& rubric : config.geval) {
    out[rubric.metric_name] = judge_metric(backend, judge, rubric, transcript, record);
  }
  return out;
}

namespace {

template <typename F>
bool attempt(MetricBundle& bundle, const std::string& name, F&& fn) {
  try {
    fn();
    return true;
  } catch (const MetricUnavailableError& e) {
    spdlog::warn("{}", e.what());
  } catch (const BackendUnavailableError& e) {
    spdlog::warn("record {}: {} unavailable: {}", bundle.record_id, name, e.what());
  } catch (const ProtocolError& e) {
    spdlog::warn("record {}: {} unavailable: {}", bundle.record_id, name, e.what());
  } catch (const DegenerateEmbeddingError& e) {
    spdlog::warn("record {}: {} unavailable: {}", bundle.record_id, name, e.what());
  } catch (const PreconditionError& e) {
    spdlog::warn("record {}: {} unavailable: {}", bundle.record_id, name, e.what());
  }
  bundle.unavailable.push_back(name);
  return false;
}

}  // namespace

MetricBundle score_explanation(Backend& backend, const MetricProfiles& profiles,
                               const ExplanationTranscript& transcript, const EvalRecord& record,
                               const MetricsConfig& config) {
  MetricBundle b;
  b.record_id = record.id;
  b.technique = transcript.technique;

  attempt(b, "coherence", [&] {
    b.coherence = coherence(backend, profiles.judge, transcript, record, config);
  });
  attempt(b, "uncertainty", [&] {
    b.uncertainty = uncertainty(backend, profiles.judge, transcript, record, config);
  });
  bool have_geval = attempt(b, "geval", [&] {
    b.geval_submetrics = geval_submetrics(backend, profiles.judge, transcript, record, config);
  });
  bool have_cos = attempt(b, "cosine_similarity", [&] {
    auto a = backend.embed(profiles.embedder, transcript.final_explanation);
    auto ref = backend.embed(profiles.embedder, record.baseline_response);
    b.cosine_similarity = cosine_similarity(a, ref);
  });
  if (have_geval && have_cos) {
    b.hallucination = hallucination(b.geval_submetrics, b.cosine_similarity);
  } else {
    b.unavailable.push_back("hallucination");
  }
  return b;
}

}  // namespace bell::metrics
