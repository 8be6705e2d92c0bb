#include "bell/elicit.hpp"

#include <regex>

#include <spdlog/spdlog.h>

#include "bell/errors.hpp"
#include "bell/logic.hpp"

namespace bell::elicit {

void to_json(json& j, const PromptConfig& c) {
  j = json{{"default_system", c.default_system},
           {"cot_trigger", c.cot_trigger},
           {"thot_trigger", c.thot_trigger},
           {"reread_prefix", c.reread_prefix},
           {"lot_facts_prefix", c.lot_facts_prefix},
           {"cove_questions_max", c.cove_questions_max},
           {"lot_max_new", c.lot_max_new},
           {"user_patterns", c.user_patterns}};
}

void from_json(const json& j, PromptConfig& c) {
  PromptConfig d;
  c.default_system = j.value("default_system", d.default_system);
  c.cot_trigger = j.value("cot_trigger", d.cot_trigger);
  c.thot_trigger = j.value("thot_trigger", d.thot_trigger);
  c.reread_prefix = j.value("reread_prefix", d.reread_prefix);
  c.lot_facts_prefix = j.value("lot_facts_prefix", d.lot_facts_prefix);
  c.cove_questions_max = j.value("cove_questions_max", d.cove_questions_max);
  c.lot_max_new = j.value("lot_max_new", d.lot_max_new);
  c.user_patterns = j.value("user_patterns", d.user_patterns);
  if (c.cove_questions_max < 1) throw ConfigError("cove_questions_max must be >= 1");
  for (const auto& [name, pattern] : c.user_patterns) {
    (void)pattern;
    parse_task_name(name);
  }
}

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return 0;
  std::size_t n = 0;
  for (std::size_t pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

std::string render(std::string_view pattern, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(pattern.size());
  std::size_t i = 0;
  while (i < pattern.size()) {
    if (pattern[i] == '{') {
      auto close = pattern.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = vars.find(std::string(pattern.substr(i + 1, close - i - 1)));
        if (it != vars.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(pattern[i]);
    ++i;
  }
  return out;
}

PromptTemplate prompt_template(const std::optional<TechniqueKind>& technique,
                               const PromptConfig& config) {
  PromptTemplate t{technique, config.default_system, {}};
  const std::string reread = "{question}\n" + config.reread_prefix + "{question}\n";
  std::size_t question_slots = 1;
  if (!technique) {
    t.user_text_pattern = "{question}";
  } else {
    switch (*technique) {
      case TechniqueKind::Cot: t.user_text_pattern = "{question}\n" + config.cot_trigger; break;
      case TechniqueKind::Thot: t.user_text_pattern = "{question}\n" + config.thot_trigger; break;
      case TechniqueKind::ReReadCot:
        t.user_text_pattern = reread + config.cot_trigger;
        question_slots = 2;
        break;
      case TechniqueKind::ReReadThot:
        t.user_text_pattern = reread + config.thot_trigger;
        question_slots = 2;
        break;
      case TechniqueKind::Cove:
      case TechniqueKind::Got: t.user_text_pattern = "{question}"; break;
      case TechniqueKind::Lot:
        t.user_text_pattern =
            "{question}\n" + config.lot_facts_prefix + "{injected_logic}\n" + config.cot_trigger;
        break;
    }
  }
  if (auto it = config.user_patterns.find(task_name(technique)); it != config.user_patterns.end()) {
    t.user_text_pattern = it->second;
  }
  if (count_occurrences(t.user_text_pattern, "{question}") != question_slots) {
    throw ConfigError("prompt pattern for " + task_name(technique) + " must contain {question} " +
                      std::to_string(question_slots) + " time(s)");
  }
  return t;
}

namespace {

ChatRequest from_template(const PromptTemplate& t, const EvalRecord& record,
                          const std::string& injected_logic = {}) {
  ChatRequest request;
  request.messages.push_back(
      {Role::System, record.system_prompt.empty() ? t.system_text : record.system_prompt});
  request.messages.push_back({Role::User, render(t.user_text_pattern,
                                                 {{"question", record.question},
                                                  {"context", record.system_prompt},
                                                  {"injected_logic", injected_logic}})});
  return request;
}

TranscriptStep exchange(Backend& backend, const BackendProfile& profile, ChatRequest request,
                        std::string label) {
  request.temperature = profile.temperature;
  ChatResponse response = backend.chat(profile, request);
  TranscriptStep step;
  step.role = Role::Assistant;
  step.content = std::move(response.content);
  step.stage_label = std::move(label);
  step.prompt = std::move(request.messages);
  step.logprobs = std::move(response.token_logprobs);
  return step;
}

ChatRequest single_user(std::string system, std::string user) {
  ChatRequest r;
  r.messages.push_back({Role::System, std::move(system)});
  r.messages.push_back({Role::User, std::move(user)});
  return r;
}

ExplanationTranscript start(const BackendProfile& profile, const EvalRecord& record,
                            const std::optional<TechniqueKind>& technique) {
  ExplanationTranscript t;
  t.record_id = record.id;
  t.technique = technique;
  t.model_id = profile.model_id;
  t.temperature = profile.temperature;
  return t;
}

void require_valid(const EvalRecord& record) {
  auto v = validate_record(record);
  if (!v.ok()) throw PreconditionError("invalid record '" + record.id + "': " + v.violations[0].message);
}

}  // namespace

ChatRequest build_plain(const EvalRecord& record, const PromptConfig& config) {
  return from_template(prompt_template(std::nullopt, config), record);
}

ChatRequest build_cot(const EvalRecord& record, const PromptConfig& config) {
  return from_template(prompt_template(TechniqueKind::Cot, config), record);
}

ChatRequest build_thot(const EvalRecord& record, const PromptConfig& config) {
  return from_template(prompt_template(TechniqueKind::Thot, config), record);
}

ChatRequest build_reread(TechniqueKind inner, const EvalRecord& record, const PromptConfig& config) {
  switch (inner) {
    case TechniqueKind::Cot:
      return from_template(prompt_template(TechniqueKind::ReReadCot, config), record);
    case TechniqueKind::Thot:
      return from_template(prompt_template(TechniqueKind::ReReadThot, config), record);
    default:
      throw ConfigError("ReRead wraps only cot or thot, not " + std::string(to_string(inner)));
  }
}

ExplanationTranscript run_single(Backend& backend, const BackendProfile& profile,
                                 const EvalRecord& record,
                                 const std::optional<TechniqueKind>& technique,
                                 const PromptConfig& config) {
  require_valid(record);
  ChatRequest request;
  if (!technique) {
    request = build_plain(record, config);
  } else {
    switch (*technique) {
      case TechniqueKind::Cot: request = build_cot(record, config); break;
      case TechniqueKind::Thot: request = build_thot(record, config); break;
      case TechniqueKind::ReReadCot: request = build_reread(TechniqueKind::Cot, record, config); break;
      case TechniqueKind::ReReadThot:
        request = build_reread(TechniqueKind::Thot, record, config);
        break;
      default:
        throw ConfigError(std::string(to_string(*technique)) + " is not a single-turn technique");
    }
  }
  ExplanationTranscript t = start(profile, record, technique);
  t.steps.push_back(exchange(backend, profile, std::move(request), "answer"));
  t.final_explanation = t.steps.back().content;
  return t;
}

// ---------------------------------------------------------------------------
// Chain of verification

std::vector<std::string> parse_numbered_questions(std::string_view text, std::size_t limit) {
  static const std::regex kNumbered(R"(^\s*(?:Q\s*)?\d+\s*[.):]\s*(.*\S)\s*$)",
                                    std::regex::ECMAScript | std::regex::icase);
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size() && out.size() < limit) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(pos, end - pos));
    std::smatch m;
    if (std::regex_match(line, m, kNumbered)) out.push_back(m[1].str());
    pos = end + 1;
  }
  return out;
}

ExplanationTranscript run_cove(Backend& backend, const BackendProfile& profile,
                               const EvalRecord& record, const PromptConfig& config,
                               int num_questions_max) {
  require_valid(record);
  if (num_questions_max < 1) throw PreconditionError("num_questions_max must be >= 1");
  ExplanationTranscript t = start(profile, record, TechniqueKind::Cove);

  t.steps.push_back(exchange(backend, profile,
                             from_template(prompt_template(TechniqueKind::Cove, config), record),
                             "baseline"));
  const std::string draft = t.steps.back().content;

  const std::string n = std::to_string(num_questions_max);
  t.steps.push_back(exchange(
      backend, profile,
      single_user(config.default_system,
                  "Question: " + record.question + "\nDraft answer: " + draft +
                      "\n\nWrite at most " + n +
                      " verification questions that would fact-check the draft answer. Give them "
                      "as a numbered list, one question per line, and nothing else."),
      "plan"));
  auto questions =
      parse_numbered_questions(t.steps.back().content, static_cast<std::size_t>(num_questions_max));

  if (questions.empty()) {
    spdlog::warn("cove: no verification questions parsed for record {}", record.id);
    t.flags.push_back("cove_degenerate");
    TranscriptStep final_step;
    final_step.role = Role::Assistant;
    final_step.content = draft;
    final_step.stage_label = "final";
    t.steps.push_back(std::move(final_step));
    t.final_explanation = draft;
    return t;
  }

  // Factored verification: each question is answered without the draft.
  std::vector<std::string> answers;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    t.steps.push_back(exchange(
        backend, profile,
        single_user("Answer the question concisely and factually.", questions[i]),
        "verify:" + std::to_string(i + 1)));
    answers.push_back(t.steps.back().content);
  }

  std::string verification;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    verification += "Q" + std::to_string(i + 1) + ": " + questions[i] + "\nA" +
                    std::to_string(i + 1) + ": " + answers[i] + "\n";
  }
  t.steps.push_back(exchange(
      backend, profile,
      single_user(record.system_prompt.empty() ? config.default_system : record.system_prompt,
                  "Question: " + record.question + "\nDraft answer: " + draft +
                      "\n\nVerification questions and independent answers:\n" + verification +
                      "\nUsing the verification results, correct any mistakes in the draft and "
                      "write the final answer with a short explanation."),
      "final"));
  t.final_explanation = t.steps.back().content;
  return t;
}

// ---------------------------------------------------------------------------
// Logic of thought

namespace {

const char* kLotExtractInstruction =
    "Extract the propositions in the problem below and the implication or negation relations "
    "between them, written in propositional logic. Name each proposition with a short "
    "descriptive identifier (letters, digits and underscores, e.g. x_is_even). Write '~' for "
    "not, '&' for and, '|' for or and '->' for implies, and separate expressions with ';'. "
    "Reply with the expressions only, or with 'none' if there are no logical relations.";

bool says_none(std::string_view reply) {
  std::string s;
  for (char c : reply) {
    if (!std::isspace(static_cast<unsigned char>(c)) && c != '.' && c != '`') {
      s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return s.empty() || s == "none" || s == "{}";
}

}  // namespace

ExplanationTranscript run_lot(Backend& backend, const BackendProfile& profile,
                              const EvalRecord& record, const PromptConfig& config) {
  require_valid(record);
  ExplanationTranscript t = start(profile, record, TechniqueKind::Lot);
  t.steps.push_back(exchange(
      backend, profile,
      single_user("You translate problems into propositional logic.",
                  std::string(kLotExtractInstruction) + "\n\nProblem: " + record.question),
      "lot:extract"));

  std::string reply = t.steps.back().content;
  for (auto& c : reply) {
    if (c == '\n' || c == '`') c = c == '\n' ? ';' : ' ';
  }
  std::vector<logic::Proposition> premises;
  bool degenerate = false;
  if (!says_none(reply)) {
    auto parsed = logic::parse(reply);
    premises = std::move(parsed.propositions);
    degenerate = premises.empty();
    if (!parsed.errors.empty()) {
      spdlog::debug("lot: {} extraction error(s) for record {}, first at {}: {}",
                    parsed.errors.size(), record.id, parsed.errors[0].position,
                    parsed.errors[0].message);
    }
  }

  if (degenerate) {
    t.flags.push_back("lot_degenerate");
    t.steps.push_back(exchange(backend, profile, build_cot(record, config), "lot:answer"));
    t.final_explanation = t.steps.back().content;
    return t;
  }

  auto extended = logic::extend(premises, config.lot_max_new);
  TranscriptStep extend_step;
  extend_step.role = Role::System;
  extend_step.stage_label = "lot:extend";
  for (const auto& p : extended) {
    if (!extend_step.content.empty()) extend_step.content += "; ";
    extend_step.content += logic::to_string(p);
  }
  t.steps.push_back(std::move(extend_step));

  ChatRequest answer = extended.empty()
                           ? build_cot(record, config)
                           : from_template(prompt_template(TechniqueKind::Lot, config), record,
                                           logic::translate(extended));
  t.steps.push_back(exchange(backend, profile, std::move(answer), "lot:answer"));
  t.final_explanation = t.steps.back().content;
  return t;
}

ExplanationTranscript run_technique(Backend& backend, const BackendProfile& profile,
                                    const EvalRecord& record,
                                    const std::optional<TechniqueKind>& technique,
                                    const ElicitConfig& config) {
  if (!technique) return run_single(backend, profile, record, technique, config.prompts);
  switch (*technique) {
    case TechniqueKind::Cove:
      return run_cove(backend, profile, record, config.prompts, config.prompts.cove_questions_max);
    case TechniqueKind::Got: return run_got(backend, profile, record, config.got_plan, config.prompts);
    case TechniqueKind::Lot: return run_lot(backend, profile, record, config.prompts);
    default: return run_single(backend, profile, record, technique, config.prompts);
  }
}

}  // namespace bell::elicit
