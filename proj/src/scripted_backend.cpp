#include <fstream>
#include <sstream>

#include "bell/backend.hpp"
#include "bell/errors.hpp"

namespace bell {

namespace {

std::string scope_text(const ChatRequest& request, const std::string& scope) {
  std::string text;
  if (scope == "last_user") {
    for (auto it = request.messages.rbegin(); it != request.messages.rend(); ++it) {
      if (it->role == Role::User) return it->content;
    }
    return text;
  }
  for (const auto& m : request.messages) {
    if (scope == "any" || (scope == "system" && m.role == Role::System) ||
        (scope == "user" && m.role == Role::User)) {
      text += m.content;
      text += '\n';
    }
  }
  return text;
}

std::int64_t rough_tokens(std::string_view text) {
  std::int64_t n = 0;
  bool in_word = false;
  for (char c : text) {
    bool space = c == ' ' || c == '\n' || c == '\t';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

}  // namespace

Script Script::from_json(const json& j) {
  Script s;
  if (j.contains("responses")) s.by_key = j.at("responses").get<std::map<std::string, std::string>>();
  if (j.contains("rules")) {
    for (const auto& r : j.at("rules")) {
      ScriptRule rule;
      r.at("contains").get_to(rule.contains);
      rule.scope = r.value("scope", std::string("any"));
      if (rule.scope != "any" && rule.scope != "system" && rule.scope != "user" &&
          rule.scope != "last_user") {
        throw ConfigError("script rule has unknown scope '" + rule.scope + "'");
      }
      r.at("reply").get_to(rule.reply);
      if (r.contains("logprobs")) rule.logprobs = r.at("logprobs").get<std::vector<double>>();
      s.rules.push_back(std::move(rule));
    }
  }
  s.default_reply = j.value("default", std::string{});
  return s;
}

Script Script::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open script '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return from_json(json::parse(buf.str()));
  } catch (const json::exception& e) {
    throw ConfigError("script '" + path.string() + "': " + e.what());
  }
}

ChatResponse ScriptedBackend::chat(const BackendProfile& profile, const ChatRequest& request) {
  ChatResponse out;
  auto hit = script_.by_key.find(to_hex(cache_key(profile.model_id, request)));
  if (hit != script_.by_key.end()) {
    out.content = hit->second;
  } else {
    bool matched = false;
    for (const auto& rule : script_.rules) {
      if (scope_text(request, rule.scope).find(rule.contains) != std::string::npos) {
        out.content = rule.reply;
        if (request.want_logprobs) out.token_logprobs = rule.logprobs;
        matched = true;
        break;
      }
    }
    if (!matched) out.content = script_.default_reply;
  }
  std::int64_t prompt_tokens = 0;
  for (const auto& m : request.messages) prompt_tokens += rough_tokens(m.content);
  out.usage = {prompt_tokens, rough_tokens(out.content)};
  return out;
}

EmbeddingVector ScriptedBackend::embed(const BackendProfile& profile, std::string_view text) {
  if (text.empty()) throw PreconditionError("embed: text must be non-empty");
  auto vec = hash_embed(text, profile.embedding_dim);
  if (vec.is_zero()) throw DegenerateEmbeddingError("text has no tokens to embed");
  return vec;
}

}  // namespace bell
