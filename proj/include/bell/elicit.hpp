#pragma once

// Thought-elicitation programs. Single-turn techniques are pure request
// builders; CoVe, GoT and LoT are multi-stage executors that record every
// exchange in an ExplanationTranscript.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bell/backend.hpp"
#include "bell/core.hpp"

namespace bell::elicit {

struct PromptConfig {
  std::string default_system =
      "You are a helpful assistant. Explain your reasoning clearly and then state the final "
      "answer.";
  std::string cot_trigger = "Let's think step by step.";
  std::string thot_trigger =
      "Walk me through this context in manageable parts step by step, summarizing and analyzing "
      "as we go.";
  std::string reread_prefix = "Read the question again: ";
  std::string lot_facts_prefix = "Consider the following logical facts: ";
  int cove_questions_max = 3;
  std::size_t lot_max_new = 16;
  /// Per-technique user pattern overrides, keyed by technique name.
  std::map<std::string, std::string> user_patterns;

  friend bool operator==(const PromptConfig&, const PromptConfig&) = default;
};

void to_json(json& j, const PromptConfig& c);
void from_json(const json& j, PromptConfig& c);

/// user_text_pattern may use {question}, {context} and {injected_logic}.
struct PromptTemplate {
  std::optional<TechniqueKind> technique;  // nullopt: plain completion
  std::string system_text;
  std::string user_text_pattern;
};

/// Template in effect for a technique, honouring overrides. Throws
/// ConfigError when a pattern has the wrong number of {question} slots.
PromptTemplate prompt_template(const std::optional<TechniqueKind>& technique,
                               const PromptConfig& config);

/// Single-pass placeholder substitution; inserted values are not rescanned.
std::string render(std::string_view pattern, const std::map<std::string, std::string>& vars);

/// Number of non-overlapping occurrences of `needle` in `haystack`.
std::size_t count_occurrences(std::string_view haystack, std::string_view needle);

ChatRequest build_plain(const EvalRecord& record, const PromptConfig& config = {});
ChatRequest build_cot(const EvalRecord& record, const PromptConfig& config = {});
ChatRequest build_thot(const EvalRecord& record, const PromptConfig& config = {});
/// inner must be Cot or Thot; anything else is a ConfigError.
ChatRequest build_reread(TechniqueKind inner, const EvalRecord& record,
                         const PromptConfig& config = {});

// ---------------------------------------------------------------------------
// Graph of thoughts

enum class GotOp { Generate, Score, Aggregate, Refine };

std::string_view to_string(GotOp op);
GotOp parse_got_op(std::string_view name);

struct GotNode {
  std::string id;
  GotOp operation = GotOp::Generate;
  /// generate: k (alternatives requested, >= 1); aggregate: top (default 2).
  json params = json::object();
};

struct GotEdge {
  std::string from;
  std::string to;
};

struct GotPlan {
  std::vector<GotNode> nodes;
  std::vector<GotEdge> edges;
};

void to_json(json& j, const GotPlan& plan);
void from_json(const json& j, GotPlan& plan);

/// Generate k candidates, score each, aggregate the best two, refine.
/// k == 1 gives the two-node chain g1 -> refine.
GotPlan default_got_plan(int k = 3);

/// Node ids in execution order. Ties are broken by declaration order.
/// Throws ConfigError on unknown ids, cycles, several sinks, k < 1, or
/// score/refine nodes without exactly one predecessor.
std::vector<std::string> validate_plan(const GotPlan& plan);

/// The first integer in a grader reply, if it lies in [0, 10].
std::optional<int> parse_got_score(std::string_view reply);

// ---------------------------------------------------------------------------
// Executors

ExplanationTranscript run_single(Backend& backend, const BackendProfile& profile,
                                 const EvalRecord& record,
                                 const std::optional<TechniqueKind>& technique,
                                 const PromptConfig& config = {});

/// Numbered lines ("1. ...", "2) ...") from a verification plan, at most `limit`.
std::vector<std::string> parse_numbered_questions(std::string_view text, std::size_t limit);

ExplanationTranscript run_cove(Backend& backend, const BackendProfile& profile,
                               const EvalRecord& record, const PromptConfig& config = {},
                               int num_questions_max = 3);

ExplanationTranscript run_got(Backend& backend, const BackendProfile& profile,
                              const EvalRecord& record, const GotPlan& plan,
                              const PromptConfig& config = {});

ExplanationTranscript run_lot(Backend& backend, const BackendProfile& profile,
                              const EvalRecord& record, const PromptConfig& config = {});

struct ElicitConfig {
  PromptConfig prompts;
  GotPlan got_plan = default_got_plan();
};

/// Dispatches to the executor for `technique` (nullopt: plain completion).
ExplanationTranscript run_technique(Backend& backend, const BackendProfile& profile,
                                    const EvalRecord& record,
                                    const std::optional<TechniqueKind>& technique,
                                    const ElicitConfig& config);

}  // namespace bell::elicit
