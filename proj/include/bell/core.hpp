#pragma once

// Domain types shared by every module. No I/O lives here; the JSON
// conversions define the canonical external form of each type.

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace bell {

using json = nlohmann::json;

enum class Role { System, User, Assistant };

std::string_view to_string(Role role);
Role parse_role(std::string_view name);

struct Message {
  Role role = Role::User;
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

enum class TechniqueKind { Cot, Thot, ReReadCot, ReReadThot, Cove, Got, Lot };

inline constexpr std::array<TechniqueKind, 7> kAllTechniques = {
    TechniqueKind::Cot,  TechniqueKind::Thot, TechniqueKind::ReReadCot, TechniqueKind::ReReadThot,
    TechniqueKind::Cove, TechniqueKind::Got,  TechniqueKind::Lot};

/// The five techniques that make up a model's explainability score.
inline constexpr std::array<TechniqueKind, 5> kScoredTechniques = {
    TechniqueKind::Cot, TechniqueKind::Thot, TechniqueKind::ReReadCot, TechniqueKind::ReReadThot,
    TechniqueKind::Cove};

std::string_view to_string(TechniqueKind kind);
/// Throws ConfigError on anything outside the closed set of lowercase names.
TechniqueKind parse_technique(std::string_view name);

/// Name used for the no-technique completion behind the hallucination column.
inline constexpr std::string_view kPlainTask = "plain";

/// Task name for an optional technique: the technique's name or "plain".
std::string task_name(const std::optional<TechniqueKind>& technique);
std::optional<TechniqueKind> parse_task_name(std::string_view name);

struct EvalRecord {
  std::string id;
  std::string system_prompt;
  std::string question;
  std::string baseline_response;

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

struct Violation {
  std::string field;
  std::string message;
};

struct ValidationResult {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
};

ValidationResult validate_record(const EvalRecord& record);

struct TranscriptStep {
  Role role = Role::Assistant;
  std::string content;
  std::string stage_label;
  /// Messages sent to the model for this stage; empty for local stages.
  std::vector<Message> prompt;
  std::optional<std::vector<double>> logprobs;

  friend bool operator==(const TranscriptStep&, const TranscriptStep&) = default;
};

struct ExplanationTranscript {
  std::string record_id;
  std::optional<TechniqueKind> technique;  // nullopt: plain completion
  std::vector<TranscriptStep> steps;
  std::string final_explanation;
  std::string model_id;
  double temperature = 0.0;
  std::vector<std::string> flags;
  std::map<std::string, double> node_scores;

  bool has_flag(std::string_view flag) const;
  const TranscriptStep* find_stage(std::string_view label) const;
  std::vector<std::string> stage_labels() const;

  friend bool operator==(const ExplanationTranscript&, const ExplanationTranscript&) = default;
};

/// Checks the transcript invariants: non-empty steps, unique stage labels,
/// final_explanation equal to the last assistant step.
ValidationResult validate_transcript(const ExplanationTranscript& transcript);

struct MetricBundle {
  std::string record_id;
  std::optional<TechniqueKind> technique;
  double coherence = 0.0;
  double uncertainty = 0.0;
  double cosine_similarity = 0.0;
  std::map<std::string, double> geval_submetrics;
  double hallucination = 0.0;
  /// Metrics that could not be computed; non-empty marks a partial bundle.
  std::vector<std::string> unavailable;

  bool complete() const { return unavailable.empty(); }

  friend bool operator==(const MetricBundle&, const MetricBundle&) = default;
};

ValidationResult validate_bundle(const MetricBundle& bundle);

struct Scorecard {
  std::string model_id;
  std::map<TechniqueKind, double> per_technique;
  std::optional<double> hallucination_pct;
  std::optional<double> model_score;
  std::size_t n_records = 0;

  friend bool operator==(const Scorecard&, const Scorecard&) = default;
};

void to_json(json& j, Role role);
void from_json(const json& j, Role& role);
void to_json(json& j, TechniqueKind kind);
void from_json(const json& j, TechniqueKind& kind);
void to_json(json& j, const Message& m);
void from_json(const json& j, Message& m);
void to_json(json& j, const EvalRecord& r);
void from_json(const json& j, EvalRecord& r);
void to_json(json& j, const TranscriptStep& s);
void from_json(const json& j, TranscriptStep& s);
void to_json(json& j, const ExplanationTranscript& t);
void from_json(const json& j, ExplanationTranscript& t);
void to_json(json& j, const MetricBundle& b);
void from_json(const json& j, MetricBundle& b);
void to_json(json& j, const Scorecard& s);
void from_json(const json& j, Scorecard& s);

}  // namespace bell
