#include "bell/backend.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "bell/errors.hpp"

namespace bell {

namespace fs = std::filesystem;

ValidationResult validate_profile(const BackendProfile& p) {
  ValidationResult r;
  if (p.name.empty()) r.violations.push_back({"name", "empty profile name"});
  if (p.kind != "openai" && p.kind != "scripted" && p.kind != "hash") {
    r.violations.push_back({"kind", "unknown backend kind '" + p.kind + "'"});
  }
  if (p.kind == "openai" && p.base_url.empty()) {
    r.violations.push_back({"base_url", "openai profile needs base_url"});
  }
  if (p.kind == "scripted" && p.script_path.empty()) {
    r.violations.push_back({"script_path", "scripted profile needs script_path"});
  }
  if (p.model_id.empty()) r.violations.push_back({"model_id", "empty model_id"});
  if (p.max_concurrency < 1) r.violations.push_back({"max_concurrency", "must be >= 1"});
  if (!(p.timeout_s > 0)) r.violations.push_back({"timeout", "must be > 0"});
  if (p.max_retries < 0) r.violations.push_back({"max_retries", "must be >= 0"});
  if (!(p.temperature >= 0)) r.violations.push_back({"temperature", "must be >= 0"});
  if (p.embedding_dim < 2) r.violations.push_back({"embedding_dim", "must be >= 2"});
  return r;
}

void to_json(json& j, const BackendProfile& p) {
  j = json{{"name", p.name},
           {"kind", p.kind},
           {"base_url", p.base_url},
           {"api_key_env", p.api_key_env},
           {"model_id", p.model_id},
           {"max_concurrency", p.max_concurrency},
           {"timeout", p.timeout_s},
           {"max_retries", p.max_retries},
           {"temperature", p.temperature},
           {"embedding_dim", p.embedding_dim},
           {"script_path", p.script_path}};
}

void from_json(const json& j, BackendProfile& p) {
  BackendProfile d;
  j.at("name").get_to(p.name);
  p.kind = j.value("kind", d.kind);
  p.base_url = j.value("base_url", d.base_url);
  p.api_key_env = j.value("api_key_env", d.api_key_env);
  j.at("model_id").get_to(p.model_id);
  p.max_concurrency = j.value("max_concurrency", d.max_concurrency);
  p.timeout_s = j.value("timeout", d.timeout_s);
  p.max_retries = j.value("max_retries", d.max_retries);
  p.temperature = j.value("temperature", d.temperature);
  p.embedding_dim = j.value("embedding_dim", d.embedding_dim);
  p.script_path = j.value("script_path", d.script_path);
}

ValidationResult validate_request(const ChatRequest& request) {
  ValidationResult r;
  if (request.messages.empty()) {
    r.violations.push_back({"messages", "request has no messages"});
  } else if (request.messages.front().role == Role::Assistant) {
    r.violations.push_back({"messages", "first message must be system or user"});
  }
  if (!(request.temperature >= 0)) r.violations.push_back({"temperature", "must be >= 0"});
  return r;
}

void to_json(json& j, const ChatRequest& r) {
  j = json{{"messages", r.messages},
           {"temperature", r.temperature},
           {"want_logprobs", r.want_logprobs}};
}

void from_json(const json& j, ChatRequest& r) {
  j.at("messages").get_to(r.messages);
  r.temperature = j.value("temperature", 0.0);
  r.want_logprobs = j.value("want_logprobs", false);
}

void to_json(json& j, const ChatResponse& r) {
  j = json{{"content", r.content},
           {"token_logprobs", r.token_logprobs ? json(*r.token_logprobs) : json(nullptr)},
           {"usage",
            {{"prompt_tokens", r.usage.prompt_tokens},
             {"completion_tokens", r.usage.completion_tokens}}}};
}

void from_json(const json& j, ChatResponse& r) {
  j.at("content").get_to(r.content);
  const auto& lp = j.at("token_logprobs");
  r.token_logprobs =
      lp.is_null() ? std::nullopt : std::optional<std::vector<double>>(lp.get<std::vector<double>>());
  const auto& usage = j.at("usage");
  usage.at("prompt_tokens").get_to(r.usage.prompt_tokens);
  usage.at("completion_tokens").get_to(r.usage.completion_tokens);
}

bool EmbeddingVector::is_zero() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
}

std::string canonical_request(std::string_view model_id, const ChatRequest& request) {
  json j{{"kind", "chat"},
         {"model_id", model_id},
         {"messages", request.messages},
         {"temperature", request.temperature},
         {"want_logprobs", request.want_logprobs}};
  return j.dump();
}

std::string canonical_embedding_request(std::string_view model_id, std::string_view text) {
  json j{{"kind", "embedding"}, {"model_id", model_id}, {"input", text}};
  return j.dump();
}

Digest cache_key(std::string_view model_id, const ChatRequest& request) {
  return sha256(canonical_request(model_id, request));
}

Digest cache_key(std::string_view model_id, std::string_view text) {
  return sha256(canonical_embedding_request(model_id, text));
}

// ---------------------------------------------------------------------------

std::size_t hash_bucket(std::string_view token, int dimension) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : token) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return static_cast<std::size_t>(h % static_cast<std::uint64_t>(dimension));
}

EmbeddingVector hash_embed(std::string_view text, int dimension) {
  if (dimension < 2) throw PreconditionError("embedding dimension must be >= 2");
  EmbeddingVector out;
  out.values.assign(static_cast<std::size_t>(dimension), 0.0);
  std::string token;
  auto flush = [&] {
    if (!token.empty()) {
      out.values[hash_bucket(token, dimension)] += 1.0;
      token.clear();
    }
  };
  for (unsigned char c : text) {
    // Bytes >= 0x80 belong to UTF-8 sequences and stay inside tokens.
    if (std::isalnum(c) || c >= 0x80) {
      token.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

// ---------------------------------------------------------------------------

ResponseCache::ResponseCache(fs::path root) : root_(std::move(root)) {}

fs::path ResponseCache::path_for(const Digest& key) const {
  std::string hex = to_hex(key);
  return root_ / hex.substr(0, 2) / (hex + ".json");
}

std::optional<json> ResponseCache::read(const Digest& key) const {
  fs::path path = path_for(key);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error&) {
    spdlog::warn("ignoring corrupt cache entry {}", path.string());
    return std::nullopt;
  }
}

void ResponseCache::write(const Digest& key, const json& entry) {
  static std::atomic<std::uint64_t> counter{0};
  fs::path path = path_for(key);
  std::lock_guard lock(write_mutex_);
  if (fs::exists(path)) return;  // content-addressed: first value stands
  fs::create_directories(path.parent_path());
  std::ostringstream tmp_name;
  tmp_name << path.filename().string() << ".tmp." << std::this_thread::get_id() << '.'
           << counter.fetch_add(1);
  fs::path tmp = path.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write cache entry " + tmp.string());
    out << entry.dump(2) << '\n';
    if (!out) throw IoError("error writing cache entry " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::optional<ChatResponse> ResponseCache::get_chat(const Digest& key) const {
  auto entry = read(key);
  if (!entry || !entry->contains("response")) return std::nullopt;
  return entry->at("response").get<ChatResponse>();
}

void ResponseCache::put_chat(const Digest& key, std::string_view canonical,
                             const ChatResponse& response) {
  write(key, json{{"key", to_hex(key)},
                  {"request", json::parse(canonical)},
                  {"response", response}});
}

std::optional<EmbeddingVector> ResponseCache::get_embedding(const Digest& key) const {
  auto entry = read(key);
  if (!entry || !entry->contains("embedding")) return std::nullopt;
  return EmbeddingVector{entry->at("embedding").get<std::vector<double>>()};
}

void ResponseCache::put_embedding(const Digest& key, std::string_view canonical,
                                  const EmbeddingVector& embedding) {
  write(key, json{{"key", to_hex(key)},
                  {"request", json::parse(canonical)},
                  {"embedding", embedding.values}});
}

// ---------------------------------------------------------------------------

AdmissionLimiter::Permit::Permit(AdmissionLimiter& owner, std::string name)
    : owner_(owner), name_(std::move(name)) {}

AdmissionLimiter::Permit::~Permit() { owner_.release(name_); }

AdmissionLimiter::Permit AdmissionLimiter::acquire(const BackendProfile& profile) {
  std::unique_lock lock(mutex_);
  const int limit = std::max(1, profile.max_concurrency);
  cv_.wait(lock, [&] { return in_flight_[profile.name] < limit; });
  ++in_flight_[profile.name];
  return Permit(*this, profile.name);
}

void AdmissionLimiter::release(const std::string& name) {
  {
    std::lock_guard lock(mutex_);
    --in_flight_[name];
  }
  cv_.notify_all();
}

CachingBackend::CachingBackend(std::shared_ptr<Backend> inner, std::shared_ptr<ResponseCache> cache)
    : inner_(std::move(inner)), cache_(std::move(cache)) {}

ChatResponse CachingBackend::chat(const BackendProfile& profile, const ChatRequest& request) {
  auto check = validate_request(request);
  if (!check.ok()) throw PreconditionError("invalid chat request: " + check.violations[0].message);
  const std::string canonical = canonical_request(profile.model_id, request);
  const Digest key = sha256(canonical);
  if (cache_) {
    if (auto hit = cache_->get_chat(key)) {
      ++hits_;
      return *hit;
    }
  }
  ChatResponse response;
  {
    auto permit = limiter_.acquire(profile);
    ++forwarded_;
    response = inner_->chat(profile, request);
  }
  if (cache_) cache_->put_chat(key, canonical, response);
  return response;
}

EmbeddingVector CachingBackend::embed(const BackendProfile& profile, std::string_view text) {
  if (text.empty()) throw PreconditionError("embed: text must be non-empty");
  const std::string canonical = canonical_embedding_request(profile.model_id, text);
  const Digest key = sha256(canonical);
  if (cache_) {
    if (auto hit = cache_->get_embedding(key)) {
      ++hits_;
      return *hit;
    }
  }
  EmbeddingVector vec;
  {
    auto permit = limiter_.acquire(profile);
    ++forwarded_;
    vec = inner_->embed(profile, text);
  }
  if (vec.dimension() < 2) throw ProtocolError("embedding has dimension < 2");
  if (vec.is_zero()) throw DegenerateEmbeddingError("endpoint returned a zero embedding");
  if (cache_) cache_->put_embedding(key, canonical, vec);
  return vec;
}

// ---------------------------------------------------------------------------

std::chrono::milliseconds RetryPolicy::nominal_delay(int retry) const {
  double ms = static_cast<double>(base.count()) * std::pow(factor, std::max(0, retry - 1));
  return std::chrono::milliseconds(static_cast<std::int64_t>(ms));
}

bool is_transient_status(int status) { return status == 0 || status == 429 || status >= 500; }

namespace {

thread_local int t_last_retries = 0;

std::string join_url(const std::string& base, std::string_view path) {
  std::string url = base;
  while (!url.empty() && url.back() == '/') url.pop_back();
  url += path;
  return url;
}

std::string snippet(std::string_view body) {
  constexpr std::size_t kMax = 200;
  return std::string(body.substr(0, kMax));
}

}  // namespace

OpenAiBackend::OpenAiBackend(std::shared_ptr<HttpTransport> transport, RetryPolicy policy,
                             Sleeper sleeper)
    : transport_(std::move(transport)), policy_(policy), sleeper_(std::move(sleeper)) {
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

int OpenAiBackend::last_retry_count() { return t_last_retries; }

HttpResult OpenAiBackend::post_with_retry(const BackendProfile& profile, const std::string& path,
                                          const json& body) {
  std::vector<std::pair<std::string, std::string>> headers{{"Content-Type", "application/json"}};
  if (!profile.api_key_env.empty()) {
    const char* key = std::getenv(profile.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw ConfigError("environment variable " + profile.api_key_env + " (API key for profile '" +
                        profile.name + "') is not set");
    }
    headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }
  const std::string url = join_url(profile.base_url, path);
  const std::string payload = body.dump();
  thread_local std::mt19937 rng{std::random_device{}()};
  std::uniform_real_distribution<double> stretch(1.0, 1.0 + policy_.jitter);

  t_last_retries = 0;
  HttpResult result;
  for (int attempt = 0;; ++attempt) {
    result = transport_->post(url, headers, payload, std::chrono::duration<double>(profile.timeout_s));
    if (result.status == 401 || result.status == 403) {
      throw AuthError(result.status, profile.name + ": authentication failed (HTTP " +
                                         std::to_string(result.status) + ")");
    }
    if (result.status >= 200 && result.status < 300) return result;
    if (!is_transient_status(result.status)) {
      throw BackendUnavailableError(result.status, attempt + 1,
                                    profile.name + ": HTTP " + std::to_string(result.status) +
                                        ": " + snippet(result.body));
    }
    if (attempt >= profile.max_retries) {
      std::string why = result.status == 0 ? result.error : "HTTP " + std::to_string(result.status);
      throw BackendUnavailableError(result.status, attempt + 1,
                                    profile.name + ": giving up after " +
                                        std::to_string(attempt + 1) + " attempts (" + why + ")");
    }
    auto delay = std::chrono::milliseconds(static_cast<std::int64_t>(
        static_cast<double>(policy_.nominal_delay(attempt + 1).count()) * stretch(rng)));
    spdlog::warn("{}: transient failure ({}), retry {}/{} in {} ms", profile.name,
                 result.status == 0 ? result.error : "HTTP " + std::to_string(result.status),
                 attempt + 1, profile.max_retries, delay.count());
    t_last_retries = attempt + 1;
    sleeper_(delay);
  }
}

json build_chat_body(const BackendProfile& profile, const ChatRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  }
  json body{{"model", profile.model_id},
            {"messages", messages},
            {"temperature", request.temperature},
            {"stream", false}};
  if (request.want_logprobs) body["logprobs"] = true;
  return body;
}

ChatResponse parse_chat_body(std::string_view body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("chat response is not JSON: ") + e.what());
  }
  try {
    const auto& choice = j.at("choices").at(0);
    ChatResponse r;
    const auto& content = choice.at("message").at("content");
    r.content = content.is_null() ? std::string{} : content.get<std::string>();
    if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
        choice["logprobs"].contains("content") && choice["logprobs"]["content"].is_array()) {
      std::vector<double> lps;
      for (const auto& tok : choice["logprobs"]["content"]) {
        double lp = tok.at("logprob").get<double>();
        if (lp > 0) throw ProtocolError("token logprob > 0 in chat response");
        lps.push_back(lp);
      }
      r.token_logprobs = std::move(lps);
    }
    if (j.contains("usage") && j["usage"].is_object()) {
      r.usage.prompt_tokens = j["usage"].value("prompt_tokens", std::int64_t{0});
      r.usage.completion_tokens = j["usage"].value("completion_tokens", std::int64_t{0});
    }
    return r;
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("unexpected chat response shape: ") + e.what());
  }
}

EmbeddingVector parse_embedding_body(std::string_view body) {
  try {
    json j = json::parse(body);
    EmbeddingVector v{j.at("data").at(0).at("embedding").get<std::vector<double>>()};
    return v;
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("unexpected embedding response: ") + e.what());
  }
}

ChatResponse OpenAiBackend::chat(const BackendProfile& profile, const ChatRequest& request) {
  auto result = post_with_retry(profile, "/chat/completions", build_chat_body(profile, request));
  return parse_chat_body(result.body);
}

EmbeddingVector OpenAiBackend::embed(const BackendProfile& profile, std::string_view text) {
  if (text.empty()) throw PreconditionError("embed: text must be non-empty");
  json body{{"model", profile.model_id}, {"input", text}};
  auto result = post_with_retry(profile, "/embeddings", body);
  auto vec = parse_embedding_body(result.body);
  if (vec.dimension() < 2) throw ProtocolError("embedding has dimension < 2");
  if (vec.is_zero()) throw DegenerateEmbeddingError(profile.name + ": zero embedding returned");
  return vec;
}

ChatResponse HashEmbedBackend::chat(const BackendProfile& profile, const ChatRequest&) {
  throw ConfigError("profile '" + profile.name + "' is embedding-only (kind hash)");
}

EmbeddingVector HashEmbedBackend::embed(const BackendProfile& profile, std::string_view text) {
  if (text.empty()) throw PreconditionError("embed: text must be non-empty");
  auto vec = hash_embed(text, profile.embedding_dim);
  if (vec.is_zero()) throw DegenerateEmbeddingError("text has no tokens to embed");
  return vec;
}

RoutingBackend::RoutingBackend(const std::vector<BackendProfile>& profiles,
                               std::shared_ptr<HttpTransport> transport)
    : http_(std::make_shared<OpenAiBackend>(transport ? std::move(transport)
                                                       : make_http_transport())),
      hash_(std::make_shared<HashEmbedBackend>()) {
  for (const auto& p : profiles) {
    if (p.kind == "scripted") {
      scripted_[p.name] = std::make_shared<ScriptedBackend>(Script::load(p.script_path));
    }
  }
}

Backend& RoutingBackend::route(const BackendProfile& profile) {
  if (profile.kind == "scripted") {
    auto it = scripted_.find(profile.name);
    if (it == scripted_.end()) throw ConfigError("no script loaded for profile '" + profile.name + "'");
    return *it->second;
  }
  if (profile.kind == "hash") return *hash_;
  if (profile.kind == "openai") return *http_;
  throw ConfigError("unknown backend kind '" + profile.kind + "'");
}

ChatResponse RoutingBackend::chat(const BackendProfile& profile, const ChatRequest& request) {
  return route(profile).chat(profile, request);
}

EmbeddingVector RoutingBackend::embed(const BackendProfile& profile, std::string_view text) {
  return route(profile).embed(profile, text);
}

}  // namespace bell
