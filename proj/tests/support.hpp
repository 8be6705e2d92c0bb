#pragma once

// Shared fixtures for the unit and acceptance tests.

#include <atomic>
#include <filesystem>
#include <functional>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bell/backend.hpp"
#include "bell/core.hpp"

namespace bell::testing {

inline std::filesystem::path data_dir() { return BELL_TEST_DATA_DIR; }

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("bell-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream(path, std::ios::binary) << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Copies the fixture files into `dir` so runs write beside them.
inline void copy_fixture(const std::filesystem::path& dir) {
  for (const char* name : {"fixture5.jsonl", "model_script.json", "judge_script.json", "run.json"}) {
    std::filesystem::copy_file(data_dir() / name, dir / name,
                               std::filesystem::copy_options::overwrite_existing);
  }
}

struct RecordedPost {
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
};

/// Replays queued results, then a fallback; records every request.
class FakeTransport : public HttpTransport {
 public:
  explicit FakeTransport(std::vector<HttpResult> queue = {}, HttpResult fallback = {})
      : queue_(std::move(queue)), fallback_(std::move(fallback)) {}

  HttpResult post(const std::string& url,
                  const std::vector<std::pair<std::string, std::string>>& headers,
                  const std::string& body, std::chrono::duration<double>) override {
    std::lock_guard lock(mutex_);
    posts_.push_back({url, headers, body});
    if (next_ < queue_.size()) return queue_[next_++];
    return fallback_;
  }

  std::vector<RecordedPost> posts() const {
    std::lock_guard lock(mutex_);
    return posts_;
  }

 private:
  mutable std::mutex mutex_;
  std::vector<HttpResult> queue_;
  std::size_t next_ = 0;
  HttpResult fallback_;
  std::vector<RecordedPost> posts_;
};

/// Answers each request with a user-supplied function.
class FunctionTransport : public HttpTransport {
 public:
  using Handler = std::function<HttpResult(const std::string& url, const json& body)>;
  explicit FunctionTransport(Handler handler) : handler_(std::move(handler)) {}

  HttpResult post(const std::string& url, const std::vector<std::pair<std::string, std::string>>&,
                  const std::string& body, std::chrono::duration<double>) override {
    ++calls_;
    return handler_(url, json::parse(body));
  }
  int calls() const { return calls_.load(); }

 private:
  Handler handler_;
  std::atomic<int> calls_{0};
};

inline std::string chat_completion_body(const std::string& content) {
  json j = {{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})},
            {"usage", {{"prompt_tokens", 3}, {"completion_tokens", 2}, {"total_tokens", 5}}}};
  return j.dump();
}

inline BackendProfile scripted_profile(const std::string& name = "model") {
  BackendProfile p;
  p.name = name;
  p.kind = "scripted";
  p.model_id = "scripted-" + name;
  return p;
}

inline EvalRecord make_record(const std::string& id, const std::string& question,
                              const std::string& baseline = "4") {
  EvalRecord r;
  r.id = id;
  r.question = question;
  r.baseline_response = baseline;
  return r;
}

/// Every request a backend receives, in order.
class RecordingBackend : public Backend {
 public:
  explicit RecordingBackend(std::shared_ptr<Backend> inner) : inner_(std::move(inner)) {}

  ChatResponse chat(const BackendProfile& profile, const ChatRequest& request) override {
    {
      std::lock_guard lock(mutex_);
      requests_.push_back(request);
    }
    return inner_->chat(profile, request);
  }
  EmbeddingVector embed(const BackendProfile& profile, std::string_view text) override {
    {
      std::lock_guard lock(mutex_);
      embeds_.emplace_back(text);
    }
    return inner_->embed(profile, text);
  }

  std::vector<ChatRequest> requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
  }
  std::size_t embed_calls() const {
    std::lock_guard lock(mutex_);
    return embeds_.size();
  }

 private:
  std::shared_ptr<Backend> inner_;
  mutable std::mutex mutex_;
  std::vector<ChatRequest> requests_;
  std::vector<std::string> embeds_;
};

inline std::string request_text(const ChatRequest& r) {
  std::string out;
  for (const auto& m : r.messages) out += m.content + "\n";
  return out;
}

}  // namespace bell::testing
