#pragma once

// Chat-completion and embedding access. Every backend implements the
// Backend interface; CachingBackend layers the content-addressed response
// cache and the per-profile admission limit over any of them.

#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bell/core.hpp"

namespace bell {

struct BackendProfile {
  std::string name;
  /// "openai" (HTTP), "scripted" (deterministic offline) or "hash" (local
  /// term-frequency embedder, embeddings only).
  std::string kind = "openai";
  std::string base_url;
  std::string api_key_env;
  std::string model_id;
  int max_concurrency = 4;
  double timeout_s = 60.0;
  int max_retries = 3;
  double temperature = 0.0;
  int embedding_dim = 512;
  /// Script file for kind == "scripted".
  std::string script_path;

  friend bool operator==(const BackendProfile&, const BackendProfile&) = default;
};

ValidationResult validate_profile(const BackendProfile& profile);
void to_json(json& j, const BackendProfile& p);
void from_json(const json& j, BackendProfile& p);

struct ChatRequest {
  std::vector<Message> messages;
  double temperature = 0.0;
  bool want_logprobs = false;

  friend bool operator==(const ChatRequest&, const ChatRequest&) = default;
};

ValidationResult validate_request(const ChatRequest& request);
void to_json(json& j, const ChatRequest& r);
void from_json(const json& j, ChatRequest& r);

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;

  friend bool operator==(const Usage&, const Usage&) = default;
};

struct ChatResponse {
  std::string content;
  std::optional<std::vector<double>> token_logprobs;
  Usage usage;

  friend bool operator==(const ChatResponse&, const ChatResponse&) = default;
};

void to_json(json& j, const ChatResponse& r);
void from_json(const json& j, ChatResponse& r);

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dimension() const { return values.size(); }
  bool is_zero() const;

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

// ---------------------------------------------------------------------------
// Content addressing

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::string_view data);
std::string to_hex(const Digest& digest);

/// Canonical serialization hashed by cache_key. Object keys are sorted, so
/// the bytes do not depend on the order fields were written in.
std::string canonical_request(std::string_view model_id, const ChatRequest& request);
std::string canonical_embedding_request(std::string_view model_id, std::string_view text);

Digest cache_key(std::string_view model_id, const ChatRequest& request);
Digest cache_key(std::string_view model_id, std::string_view text);

// ---------------------------------------------------------------------------

class Backend {
 public:
  virtual ~Backend() = default;

  virtual ChatResponse chat(const BackendProfile& profile, const ChatRequest& request) = 0;
  virtual EmbeddingVector embed(const BackendProfile& profile, std::string_view text) = 0;
};

/// Hashed term-frequency embedding: lowercase alphanumeric tokens, each
/// adding 1 to bucket fnv1a(token) % dimension. Offline fallback only.
EmbeddingVector hash_embed(std::string_view text, int dimension = 512);

/// Bucket a token lands in under hash_embed.
std::size_t hash_bucket(std::string_view token, int dimension);

/// On-disk store under `root`: one file per key at <root>/<hex[0:2]>/<hex>.json.
/// Writes go to a temporary file that is renamed into place.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path root);

  std::optional<ChatResponse> get_chat(const Digest& key) const;
  void put_chat(const Digest& key, std::string_view canonical, const ChatResponse& response);

  std::optional<EmbeddingVector> get_embedding(const Digest& key) const;
  void put_embedding(const Digest& key, std::string_view canonical,
                     const EmbeddingVector& embedding);

  std::filesystem::path path_for(const Digest& key) const;
  const std::filesystem::path& root() const { return root_; }

 private:
  std::optional<json> read(const Digest& key) const;
  void write(const Digest& key, const json& entry);

  std::filesystem::path root_;
  std::mutex write_mutex_;
};

/// Counting gate bounding in-flight calls per profile name.
class AdmissionLimiter {
 public:
  class Permit {
   public:
    Permit(AdmissionLimiter& owner, std::string name);
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;
    ~Permit();

   private:
    AdmissionLimiter& owner_;
    std::string name_;
  };

  Permit acquire(const BackendProfile& profile);

 private:
  void release(const std::string& name);

  std::mutex mutex_;
  std::condition_variable cv_;
  std::map<std::string, int> in_flight_;
};

/// Decorator adding the response cache and admission limiting. Calls that
/// reach the inner backend are counted; a warm cache forwards none.
class CachingBackend : public Backend {
 public:
  CachingBackend(std::shared_ptr<Backend> inner, std::shared_ptr<ResponseCache> cache);

  ChatResponse chat(const BackendProfile& profile, const ChatRequest& request) override;
  EmbeddingVector embed(const BackendProfile& profile, std::string_view text) override;

  std::size_t forwarded_calls() const { return forwarded_.load(); }
  std::size_t cache_hits() const { return hits_.load(); }

 private:
  std::shared_ptr<Backend> inner_;
  std::shared_ptr<ResponseCache> cache_;
  AdmissionLimiter limiter_;
  std::atomic<std::size_t> forwarded_{0};
  std::atomic<std::size_t> hits_{0};
};

// ---------------------------------------------------------------------------
// HTTP

struct HttpResult {
  int status = 0;  // 0: no HTTP response (timeout, refused connection)
  std::string body;
  std::string error;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResult post(const std::string& url,
                          const std::vector<std::pair<std::string, std::string>>& headers,
                          const std::string& body, std::chrono::duration<double> timeout) = 0;
};

std::shared_ptr<HttpTransport> make_http_transport();

struct RetryPolicy {
  std::chrono::milliseconds base{1000};
  double factor = 2.0;
  /// Each delay is stretched by a uniform factor in [1, 1 + jitter].
  double jitter = 0.25;

  /// Un-jittered delay before retry number `retry` (1-based).
  std::chrono::milliseconds nominal_delay(int retry) const;
};

bool is_transient_status(int status);

/// OpenAI-compatible chat-completions and embeddings client.
class OpenAiBackend : public Backend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit OpenAiBackend(std::shared_ptr<HttpTransport> transport, RetryPolicy policy = {},
                         Sleeper sleeper = {});

  ChatResponse chat(const BackendProfile& profile, const ChatRequest& request) override;
  EmbeddingVector embed(const BackendProfile& profile, std::string_view text) override;

  /// Retries performed by the most recent call on this thread.
  static int last_retry_count();

 private:
  HttpResult post_with_retry(const BackendProfile& profile, const std::string& path,
                             const json& body);

  std::shared_ptr<HttpTransport> transport_;
  RetryPolicy policy_;
  Sleeper sleeper_;
};

json build_chat_body(const BackendProfile& profile, const ChatRequest& request);
ChatResponse parse_chat_body(std::string_view body);
EmbeddingVector parse_embedding_body(std::string_view body);

// ---------------------------------------------------------------------------
// Scripted backend

/// Deterministic offline responder. Lookup order: exact cache-key entries,
/// then the first rule whose `contains` text occurs in the selected message
/// content, then the default reply.
struct ScriptRule {
  std::string contains;
  /// "any" (all messages), "system", "user" or "last_user".
  std::string scope = "any";
  std::string reply;
  std::optional<std::vector<double>> logprobs;
};

struct Script {
  std::map<std::string, std::string> by_key;  // hex digest -> reply
  std::vector<ScriptRule> rules;
  std::string default_reply;

  static Script load(const std::filesystem::path& path);
  static Script from_json(const json& j);
};

class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(Script script) : script_(std::move(script)) {}

  ChatResponse chat(const BackendProfile& profile, const ChatRequest& request) override;
  /// hash_embed at the profile's embedding dimension.
  EmbeddingVector embed(const BackendProfile& profile, std::string_view text) override;

 private:
  Script script_;
};

/// Embedding-only backend over hash_embed.
class HashEmbedBackend : public Backend {
 public:
  ChatResponse chat(const BackendProfile& profile, const ChatRequest& request) override;
  EmbeddingVector embed(const BackendProfile& profile, std::string_view text) override;
};

/// Dispatches on BackendProfile::kind. Scripted profiles load their script
/// once at construction.
class RoutingBackend : public Backend {
 public:
  RoutingBackend(const std::vector<BackendProfile>& profiles,
                 std::shared_ptr<HttpTransport> transport);

  ChatResponse chat(const BackendProfile& profile, const ChatRequest& request) override;
  EmbeddingVector embed(const BackendProfile& profile, std::string_view text) override;

 private:
  Backend& route(const BackendProfile& profile);

  std::shared_ptr<Backend> http_;
  std::shared_ptr<Backend> hash_;
  std::map<std::string, std::shared_ptr<Backend>> scripted_;
};

}  // namespace bell
