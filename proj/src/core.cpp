#include "bell/core.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "bell/errors.hpp"

namespace bell {

namespace {

constexpr std::array<std::string_view, 7> kTechniqueNames = {
    "cot", "thot", "reread_cot", "reread_thot", "cove", "got", "lot"};

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

std::string_view to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

Role parse_role(std::string_view name) {
  if (name == "system") return Role::System;
  if (name == "user") return Role::User;
  if (name == "assistant") return Role::Assistant;
  throw ConfigError("unknown role '" + std::string(name) + "'");
}

std::string_view to_string(TechniqueKind kind) {
  return kTechniqueNames[static_cast<std::size_t>(kind)];
}

TechniqueKind parse_technique(std::string_view name) {
  for (std::size_t i = 0; i < kTechniqueNames.size(); ++i) {
    if (kTechniqueNames[i] == name) return static_cast<TechniqueKind>(i);
  }
  throw ConfigError("unknown technique '" + std::string(name) + "'");
}

std::string task_name(const std::optional<TechniqueKind>& technique) {
  return std::string(technique ? to_string(*technique) : kPlainTask);
}

std::optional<TechniqueKind> parse_task_name(std::string_view name) {
  if (name == kPlainTask) return std::nullopt;
  return parse_technique(name);
}

ValidationResult validate_record(const EvalRecord& record) {
  ValidationResult result;
  if (record.id.empty()) result.violations.push_back({"id", "empty id"});
  if (blank(record.question)) result.violations.push_back({"question", "empty question"});
  if (blank(record.baseline_response)) {
    result.violations.push_back({"baseline_response", "empty baseline_response"});
  }
  return result;
}

bool ExplanationTranscript::has_flag(std::string_view flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

const TranscriptStep* ExplanationTranscript::find_stage(std::string_view label) const {
  for (const auto& step : steps) {
    if (step.stage_label == label) return &step;
  }
  return nullptr;
}

std::vector<std::string> ExplanationTranscript::stage_labels() const {
  std::vector<std::string> labels;
  labels.reserve(steps.size());
  for (const auto& step : steps) labels.push_back(step.stage_label);
  return labels;
}

ValidationResult validate_transcript(const ExplanationTranscript& transcript) {
  ValidationResult result;
  if (transcript.steps.empty()) {
    result.violations.push_back({"steps", "transcript has no steps"});
    return result;
  }
  std::set<std::string> seen;
  for (const auto& step : transcript.steps) {
    if (!seen.insert(step.stage_label).second) {
      result.violations.push_back({"steps", "duplicate stage label '" + step.stage_label + "'"});
    }
  }
  auto last = std::find_if(transcript.steps.rbegin(), transcript.steps.rend(),
                           [](const TranscriptStep& s) { return s.role == Role::Assistant; });
  if (last == transcript.steps.rend()) {
    result.violations.push_back({"steps", "no assistant step"});
  } else if (last->content != transcript.final_explanation) {
    result.violations.push_back(
        {"final_explanation", "final_explanation differs from the last assistant step"});
  }
  return result;
}

ValidationResult validate_bundle(const MetricBundle& bundle) {
  ValidationResult result;
  auto unit = [&](const char* field, double v) {
    if (!(v >= 0.0 && v <= 1.0)) result.violations.push_back({field, "outside [0,1]"});
  };
  unit("coherence", bundle.coherence);
  unit("uncertainty", bundle.uncertainty);
  unit("hallucination", bundle.hallucination);
  if (!(bundle.cosine_similarity >= -1.0 && bundle.cosine_similarity <= 1.0)) {
    result.violations.push_back({"cosine_similarity", "outside [-1,1]"});
  }
  for (const auto& [name, v] : bundle.geval_submetrics) unit(name.c_str(), v);
  return result;
}

void to_json(json& j, Role role) { j = std::string(to_string(role)); }
void from_json(const json& j, Role& role) { role = parse_role(j.get<std::string>()); }
void to_json(json& j, TechniqueKind kind) { j = std::string(to_string(kind)); }
void from_json(const json& j, TechniqueKind& kind) {
  kind = parse_technique(j.get<std::string>());
}

void to_json(json& j, const Message& m) { j = json{{"role", m.role}, {"content", m.content}}; }

void from_json(const json& j, Message& m) {
  j.at("role").get_to(m.role);
  j.at("content").get_to(m.content);
}

void to_json(json& j, const EvalRecord& r) {
  j = json{{"id", r.id},
           {"system_prompt", r.system_prompt},
           {"question", r.question},
           {"baseline_response", r.baseline_response}};
}

void from_json(const json& j, EvalRecord& r) {
  j.at("id").get_to(r.id);
  r.system_prompt = j.value("system_prompt", std::string{});
  j.at("question").get_to(r.question);
  j.at("baseline_response").get_to(r.baseline_response);
}

void to_json(json& j, const TranscriptStep& s) {
  j = json{{"role", s.role},
           {"content", s.content},
           {"stage_label", s.stage_label},
           {"prompt", s.prompt}};
  if (s.logprobs) j["logprobs"] = *s.logprobs;
}

void from_json(const json& j, TranscriptStep& s) {
  j.at("role").get_to(s.role);
  j.at("content").get_to(s.content);
  j.at("stage_label").get_to(s.stage_label);
  s.prompt = j.value("prompt", std::vector<Message>{});
  if (j.contains("logprobs")) {
    s.logprobs = j.at("logprobs").get<std::vector<double>>();
  } else {
    s.logprobs.reset();
  }
}

void to_json(json& j, const ExplanationTranscript& t) {
  j = json{{"record_id", t.record_id},
           {"technique", task_name(t.technique)},
           {"steps", t.steps},
           {"final_explanation", t.final_explanation},
           {"model_id", t.model_id},
           {"temperature", t.temperature},
           {"flags", t.flags},
           {"node_scores", t.node_scores}};
}

void from_json(const json& j, ExplanationTranscript& t) {
  j.at("record_id").get_to(t.record_id);
  t.technique = parse_task_name(j.at("technique").get<std::string>());
  j.at("steps").get_to(t.steps);
  j.at("final_explanation").get_to(t.final_explanation);
  j.at("model_id").get_to(t.model_id);
  t.temperature = j.value("temperature", 0.0);
  t.flags = j.value("flags", std::vector<std::string>{});
  t.node_scores = j.value("node_scores", std::map<std::string, double>{});
}

void to_json(json& j, const MetricBundle& b) {
  j = json{{"record_id", b.record_id},
           {"technique", task_name(b.technique)},
           {"coherence", b.coherence},
           {"uncertainty", b.uncertainty},
           {"cosine_similarity", b.cosine_similarity},
           {"geval_submetrics", b.geval_submetrics},
           {"hallucination", b.hallucination},
           {"unavailable", b.unavailable}};
}

void from_json(const json& j, MetricBundle& b) {
  j.at("record_id").get_to(b.record_id);
  b.technique = parse_task_name(j.at("technique").get<std::string>());
  j.at("coherence").get_to(b.coherence);
  j.at("uncertainty").get_to(b.uncertainty);
  j.at("cosine_similarity").get_to(b.cosine_similarity);
  j.at("geval_submetrics").get_to(b.geval_submetrics);
  j.at("hallucination").get_to(b.hallucination);
  b.unavailable = j.value("unavailable", std::vector<std::string>{});
}

void to_json(json& j, const Scorecard& s) {
  json per = json::object();
  for (const auto& [kind, pct] : s.per_technique) per[std::string(to_string(kind))] = pct;
  j = json{{"model_id", s.model_id},
           {"per_technique", per},
           {"hallucination_pct", s.hallucination_pct ? json(*s.hallucination_pct) : json(nullptr)},
           {"model_score", s.model_score ? json(*s.model_score) : json(nullptr)},
           {"n_records", s.n_records}};
}

void from_json(const json& j, Scorecard& s) {
  j.at("model_id").get_to(s.model_id);
  s.per_technique.clear();
  for (const auto& [name, pct] : j.at("per_technique").items()) {
    s.per_technique[parse_technique(name)] = pct.get<double>();
  }
  const auto& h = j.at("hallucination_pct");
  s.hallucination_pct = h.is_null() ? std::nullopt : std::optional<double>(h.get<double>());
  const auto& m = j.at("model_score");
  s.model_score = m.is_null() ? std::nullopt : std::optional<double>(m.get<double>());
  j.at("n_records").get_to(s.n_records);
}

}  // namespace bell
