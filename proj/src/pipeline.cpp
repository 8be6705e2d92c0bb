#include "bell/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <ctime>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "bell/errors.hpp"
#include "bell/report.hpp"

namespace bell::pipeline {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Files

void write_atomic(const fs::path& path, std::string_view content) {
  static std::atomic<std::uint64_t> counter{0};
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ostringstream name;
  name << path.filename().string() << ".tmp." << std::this_thread::get_id() << '.'
       << counter.fetch_add(1);
  fs::path tmp = path.parent_path() / name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("error writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string path_component(std::string_view id) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : id) {
    if (std::isalnum(c) || c == '.' || c == '_' || c == '-') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0x0f]);
    }
  }
  if (out == "." || out == "..") out = "%2E" + out.substr(1);
  return out;
}

fs::path transcript_path(const fs::path& run_dir, std::string_view record_id, std::string_view task) {
  return run_dir / "transcripts" / path_component(record_id) / (std::string(task) + ".json");
}

fs::path metrics_path(const fs::path& run_dir, std::string_view record_id, std::string_view task) {
  return run_dir / "metrics" / path_component(record_id) / (std::string(task) + ".json");
}

// ---------------------------------------------------------------------------
// Config

const BackendProfile& RunConfig::profile(const std::string& name) const {
  for (const auto& p : profiles) {
    if (p.name == name) return p;
  }
  throw ConfigError("profile '" + name + "' is not defined");
}

namespace {

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  fs::path path(p);
  if (path.is_absolute()) return path.lexically_normal().string();
  return (base / path).lexically_normal().string();
}

std::string position_of(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < std::min(byte > 0 ? byte - 1 : 0, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

template <typename T>
T setting(const json& j, const char* key, const T& fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: setting '") + key + "' has the wrong type");
  }
}

}  // namespace

RunConfig parse_config(std::string_view text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: malformed JSON at " + position_of(text, e.byte) + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  static const std::set<std::string> kKnown = {
      "dataset", "profiles", "model",   "judge",         "embedder", "techniques", "mode",
      "output_dir", "cache_dir", "workers", "hallucination", "prompts", "got",        "metrics"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!kKnown.count(key)) throw ConfigError("config: unknown setting '" + key + "'");
  }

  RunConfig c;
  try {
    if (!j.contains("dataset")) throw ConfigError("config: missing 'dataset'");
    const auto& d = j.at("dataset");
    c.dataset.path = resolve(base_dir, setting<std::string>(d, "path", ""));
    c.dataset.category = setting<std::string>(d, "category", "math");
    c.dataset.rules = setting<std::vector<std::string>>(d, "rules", {});
    if (d.contains("sample") && !d.at("sample").is_null()) {
      c.dataset.sample = setting<std::size_t>(d, "sample", 0);
    }
    c.dataset.seed = setting<std::uint64_t>(d, "seed", 0);

    if (j.contains("profiles")) {
      for (const auto& p : j.at("profiles")) {
        BackendProfile profile = p.get<BackendProfile>();
        profile.script_path = resolve(base_dir, profile.script_path);
        c.profiles.push_back(std::move(profile));
      }
    }
    c.model = setting<std::string>(j, "model", "");
    c.judge = setting<std::string>(j, "judge", "");
    c.embedder = setting<std::string>(j, "embedder", "");
    if (j.contains("techniques")) {
      for (const auto& name : j.at("techniques")) c.techniques.push_back(parse_technique(name.get<std::string>()));
    } else {
      c.techniques.assign(kScoredTechniques.begin(), kScoredTechniques.end());
    }
    c.mode = score::parse_mode(setting<std::string>(j, "mode", "printed"));
    c.output_dir = resolve(base_dir, setting<std::string>(j, "output_dir", ""));
    c.cache_dir = resolve(base_dir, setting<std::string>(j, "cache_dir", ""));
    c.workers = setting<int>(j, "workers", 4);
    c.hallucination = setting<bool>(j, "hallucination", true);
    if (j.contains("prompts")) c.elicit.prompts = j.at("prompts").get<elicit::PromptConfig>();
    if (j.contains("got")) {
      const auto& g = j.at("got");
      if (g.contains("plan")) {
        c.elicit.got_plan = g.at("plan").get<elicit::GotPlan>();
      } else {
        c.elicit.got_plan = elicit::default_got_plan(setting<int>(g, "k", 3));
      }
    }
    if (j.contains("metrics")) c.metrics = j.at("metrics").get<metrics::MetricsConfig>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  validate_config(c);
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  return parse_config(text, base);
}

void validate_config(const RunConfig& c) {
  if (c.dataset.path.empty()) throw ConfigError("config: dataset.path is not set");
  if (c.dataset.category != "math" && c.dataset.category != "all" && c.dataset.category != "custom") {
    throw ConfigError("config: dataset.category must be math, all or custom");
  }
  if (c.dataset.category == "custom" && c.dataset.rules.empty()) {
    throw ConfigError("config: dataset.category custom needs dataset.rules");
  }
  std::set<std::string> names;
  for (const auto& p : c.profiles) {
    auto v = validate_profile(p);
    if (!v.ok()) {
      throw ConfigError("config: profile '" + p.name + "': " + v.violations[0].field + ": " +
                        v.violations[0].message);
    }
    if (!names.insert(p.name).second) throw ConfigError("config: duplicate profile '" + p.name + "'");
  }
  auto need = [&](const std::string& role, const std::string& name) {
    if (name.empty()) throw ConfigError("config: " + role + " profile is not set (missing '" + role + "')");
    if (!names.count(name)) {
      throw ConfigError("config: " + role + " profile '" + name + "' is not defined");
    }
  };
  need("model", c.model);
  need("judge", c.judge);
  need("embedder", c.embedder);
  if (c.profile(c.model).kind == "hash") throw ConfigError("config: model profile cannot be kind hash");
  if (c.profile(c.judge).kind == "hash") throw ConfigError("config: judge profile cannot be kind hash");
  if (c.techniques.empty()) throw ConfigError("config: technique set is empty");
  std::set<TechniqueKind> uniq(c.techniques.begin(), c.techniques.end());
  if (uniq.size() != c.techniques.size()) throw ConfigError("config: duplicate technique");
  if (c.output_dir.empty()) throw ConfigError("config: output_dir is not set");
  if (c.workers < 1) throw ConfigError("config: workers must be >= 1");
  if (std::count(c.techniques.begin(), c.techniques.end(), TechniqueKind::Got)) {
    elicit::validate_plan(c.elicit.got_plan);
  }
  for (const auto& t : c.techniques) elicit::prompt_template(t, c.elicit.prompts);
  elicit::prompt_template(std::nullopt, c.elicit.prompts);
}

namespace {

json profile_settings(const BackendProfile& p) {
  return json{{"name", p.name},
              {"kind", p.kind},
              {"base_url", p.base_url},
              {"model_id", p.model_id},
              {"temperature", p.temperature},
              {"embedding_dim", p.embedding_dim},
              {"script_path", p.script_path}};
}

json technique_names(const std::vector<TechniqueKind>& ts) {
  json out = json::array();
  for (auto t : ts) out.push_back(std::string(to_string(t)));
  return out;
}

}  // namespace

json determinism_settings(const RunConfig& c) {
  json dataset{{"path", c.dataset.path},
               {"category", c.dataset.category},
               {"rules", c.dataset.rules},
               {"sample", c.dataset.sample ? json(*c.dataset.sample) : json(nullptr)},
               {"seed", c.dataset.seed}};
  json got = json(nullptr);
  if (std::count(c.techniques.begin(), c.techniques.end(), TechniqueKind::Got)) {
    got = c.elicit.got_plan;
  }
  return json{{"dataset", dataset},
              {"model", profile_settings(c.profile(c.model))},
              {"judge", profile_settings(c.profile(c.judge))},
              {"embedder", profile_settings(c.profile(c.embedder))},
              {"techniques", technique_names(c.techniques)},
              {"mode", std::string(score::to_string(c.mode))},
              {"hallucination", c.hallucination},
              {"prompts", c.elicit.prompts},
              {"got_plan", got},
              {"metrics", c.metrics}};
}

std::string config_hash(const RunConfig& c) { return to_hex(sha256(determinism_settings(c).dump())); }

namespace {

void flatten(const json& j, const std::string& prefix, std::map<std::string, json>& out) {
  if (j.is_object() && !j.empty()) {
    for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
  } else if (j.is_array() && !j.empty()) {
    for (std::size_t i = 0; i < j.size(); ++i) {
      flatten(j[i], prefix + "[" + std::to_string(i) + "]", out);
    }
  } else {
    out[prefix] = j;
  }
}

}  // namespace

std::vector<std::string> changed_settings(const json& before, const json& after) {
  std::map<std::string, json> a;
  std::map<std::string, json> b;
  flatten(before, "", a);
  flatten(after, "", b);
  std::set<std::string> keys;
  for (const auto& [k, v] : a) keys.insert(k);
  for (const auto& [k, v] : b) keys.insert(k);
  std::vector<std::string> out;
  for (const auto& k : keys) {
    auto ia = a.find(k);
    auto ib = b.find(k);
    if (ia == a.end() || ib == b.end() || ia->second != ib->second) out.push_back(k);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

std::string_view to_string(Status s) {
  switch (s) {
    case Status::Pending: return "pending";
    case Status::Done: return "done";
    case Status::Partial: return "partial";
    case Status::Failed: return "failed";
  }
  return "pending";
}

Status parse_status(std::string_view s) {
  if (s == "pending") return Status::Pending;
  if (s == "done") return Status::Done;
  if (s == "partial") return Status::Partial;
  if (s == "failed") return Status::Failed;
  throw ConfigError("unknown status '" + std::string(s) + "'");
}

std::size_t RunManifest::count(Status s) const {
  return static_cast<std::size_t>(std::count_if(
      records.begin(), records.end(), [&](const auto& kv) { return kv.second.status == s; }));
}

std::size_t RunManifest::pending_tasks() const {
  std::size_t n = 0;
  for (const auto& [id, rec] : records) {
    for (const auto& [task, status] : rec.tasks) n += status == Status::Pending ? 1 : 0;
  }
  return n;
}

void to_json(json& j, const RunManifest& m) {
  json records = json::object();
  for (const auto& [id, rec] : m.records) {
    json tasks = json::object();
    for (const auto& [task, status] : rec.tasks) tasks[task] = std::string(to_string(status));
    records[id] = json{{"status", std::string(to_string(rec.status))}, {"tasks", tasks}};
    if (!rec.error.empty()) records[id]["error"] = rec.error;
  }
  j = json{{"config_hash", m.config_hash},
           {"settings", m.settings},
           {"dataset", m.dataset},
           {"records", records},
           {"prompts", m.prompts},
           {"harness_version", m.harness_version},
           {"started_at", m.started_at},
           {"updated_at", m.updated_at},
           {"state", m.state}};
}

void from_json(const json& j, RunManifest& m) {
  j.at("config_hash").get_to(m.config_hash);
  m.settings = j.at("settings");
  j.at("dataset").get_to(m.dataset);
  m.records.clear();
  for (const auto& [id, rec] : j.at("records").items()) {
    RecordStatus rs;
    rs.status = parse_status(rec.at("status").get<std::string>());
    for (const auto& [task, status] : rec.at("tasks").items()) {
      rs.tasks[task] = parse_status(status.get<std::string>());
    }
    rs.error = rec.value("error", std::string{});
    m.records[id] = std::move(rs);
  }
  m.prompts = j.value("prompts", json::object());
  m.harness_version = j.value("harness_version", std::string{});
  m.started_at = j.value("started_at", std::string{});
  m.updated_at = j.value("updated_at", std::string{});
  m.state = j.value("state", std::string("running"));
}

RunManifest read_manifest(const fs::path& path) {
  std::string text = read_file(path);
  try {
    return json::parse(text).get<RunManifest>();
  } catch (const json::exception& e) {
    throw IoError("manifest " + path.string() + " is malformed: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Execution

namespace {

std::string utc_now() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> task_names(const RunConfig& c) {
  std::vector<std::string> names;
  for (auto t : c.techniques) names.emplace_back(to_string(t));
  if (c.hallucination) names.emplace_back(kPlainTask);
  return names;
}

Status record_status(const RecordStatus& r) {
  bool pending = false;
  bool partial = false;
  for (const auto& [task, s] : r.tasks) {
    if (s == Status::Failed) return Status::Failed;
    pending |= s == Status::Pending;
    partial |= s == Status::Partial;
  }
  if (pending) return Status::Pending;
  return partial ? Status::Partial : Status::Done;
}

json prompt_snapshot(const RunConfig& c) {
  json templates = json::object();
  auto add = [&](const std::optional<TechniqueKind>& t) {
    auto tpl = elicit::prompt_template(t, c.elicit.prompts);
    templates[task_name(t)] = {{"system", tpl.system_text}, {"user", tpl.user_text_pattern}};
  };
  for (auto t : c.techniques) add(t);
  if (c.hallucination) add(std::nullopt);
  return json{{"templates", templates}, {"rubrics", c.metrics}, {"prompt_config", c.elicit.prompts}};
}

struct LoadedDataset {
  std::vector<EvalRecord> records;
  dataset::DatasetManifest manifest;
};

LoadedDataset load_dataset(const RunConfig& c) {
  auto loaded = dataset::load(c.dataset.path);
  for (const auto& v : loaded.violations) {
    spdlog::warn("{}:{}: {}", c.dataset.path, v.line, v.message);
  }
  std::vector<EvalRecord> records = std::move(loaded.records);
  if (c.dataset.category == "math") {
    records = dataset::filter_category(records, dataset::default_math_rules());
  } else if (c.dataset.category == "custom") {
    records = dataset::filter_category(records, c.dataset.rules);
  }
  if (c.dataset.sample) records = dataset::sample(records, *c.dataset.sample, c.dataset.seed);
  if (records.empty()) throw DatasetError("no records selected from " + c.dataset.path);

  LoadedDataset out;
  out.manifest.source_path = c.dataset.path;
  out.manifest.total_rows = loaded.total_rows;
  out.manifest.category_filter = c.dataset.category;
  out.manifest.sample_seed = c.dataset.seed;
  for (const auto& r : records) out.manifest.selected_ids.push_back(r.id);
  out.records = std::move(records);
  return out;
}

struct Task {
  const EvalRecord* record;
  std::string name;
};

class Executor {
 public:
  Executor(const RunConfig& config, fs::path run_dir, RunManifest& manifest, const RunOptions& options)
      : config_(config), run_dir_(std::move(run_dir)), manifest_(manifest), options_(options) {
    std::vector<BackendProfile> used = {config.profile(config.model), config.profile(config.judge),
                                        config.profile(config.embedder)};
    fs::path cache_dir = config.cache_dir.empty() ? run_dir_ / "cache" : fs::path(config.cache_dir);
    backend_ = std::make_shared<CachingBackend>(std::make_shared<RoutingBackend>(used, options.transport),
                                                std::make_shared<ResponseCache>(cache_dir));
  }

  /// Returns the number of tasks executed.
  std::size_t execute(const std::vector<Task>& tasks) {
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> executed{0};
    std::atomic<bool> stop{false};
    const std::size_t limit = options_.stop_after_tasks.value_or(tasks.size());
    auto worker = [&] {
      for (;;) {
        if (stop.load()) return;
        std::size_t i = next.fetch_add(1);
        if (i >= tasks.size() || i >= limit) return;
        if (!run_task(tasks[i])) stop = true;
        ++executed;
      }
    };
    const int n = std::max(1, std::min<int>(config_.workers, static_cast<int>(tasks.size())));
    {
      std::vector<std::jthread> pool;
      for (int w = 0; w < n; ++w) pool.emplace_back(worker);
    }
    if (fatal_) std::rethrow_exception(fatal_);
    return executed.load();
  }

  std::size_t backend_calls() const { return backend_->forwarded_calls(); }

  void save_manifest() {
    std::lock_guard lock(manifest_mutex_);
    manifest_.updated_at = utc_now();
    write_atomic(run_dir_ / "manifest.json", json(manifest_).dump(2) + "\n");
  }

 private:
  // False when the run must stop.
  bool run_task(const Task& task) {
    const EvalRecord& record = *task.record;
    Status status = Status::Failed;
    std::string error;
    bool keep_going = true;
    try {
      auto technique = parse_task_name(task.name);
      auto transcript = elicit::run_technique(*backend_, config_.profile(config_.model), record,
                                              technique, config_.elicit);
      auto bundle = metrics::score_explanation(
          *backend_, {config_.profile(config_.judge), config_.profile(config_.embedder)},
          transcript, record, config_.metrics);
      write_atomic(transcript_path(run_dir_, record.id, task.name), json(transcript).dump(2) + "\n");
      write_atomic(metrics_path(run_dir_, record.id, task.name), json(bundle).dump(2) + "\n");
      status = bundle.complete() ? Status::Done : Status::Partial;
    } catch (const AuthError& e) {
      error = e.what();
      keep_going = false;
      set_fatal();
    } catch (const ConfigError& e) {
      error = e.what();
      keep_going = false;
      set_fatal();
    } catch (const std::exception& e) {
      error = e.what();
      spdlog::warn("record {} / {} failed: {}", record.id, task.name, error);
    }
    {
      std::lock_guard lock(manifest_mutex_);
      auto& rec = manifest_.records[record.id];
      rec.tasks[task.name] = status;
      if (status == Status::Failed) {
        rec.error = task.name + ": " + error;
      } else if (record_status(rec) != Status::Failed) {
        rec.error.clear();
      }
      rec.status = record_status(rec);
    }
    save_manifest();
    return keep_going;
  }

  void set_fatal() {
    std::lock_guard lock(manifest_mutex_);
    if (!fatal_) fatal_ = std::current_exception();
  }

  const RunConfig& config_;
  fs::path run_dir_;
  RunManifest& manifest_;
  const RunOptions& options_;
  std::shared_ptr<CachingBackend> backend_;
  std::mutex manifest_mutex_;
  std::exception_ptr fatal_;
};

std::string model_id_of(const RunManifest& m) {
  return m.settings.at("model").at("model_id").get<std::string>();
}

RunResult finish(const RunConfig& config, const fs::path& run_dir, RunManifest& manifest,
                 Executor& executor, std::size_t executed) {
  RunResult result;
  result.run_dir = run_dir;
  result.tasks_executed = executed;
  result.backend_calls = executor.backend_calls();
  for (const auto& [id, rec] : manifest.records) {
    if (rec.status == Status::Failed) result.failed_ids.push_back(id);
  }
  if (manifest.pending_tasks() > 0) {
    manifest.state = "interrupted";
    executor.save_manifest();
    result.manifest = manifest;
    return result;
  }
  auto agg = aggregate_run(run_dir, manifest, model_id_of(manifest), config.mode);
  result.scorecard = agg.scorecard;
  result.aggregates = agg.aggregates;

  const std::size_t failed = result.failed_ids.size();
  if (2 * failed > manifest.records.size()) {
    manifest.state = "failed";
  } else if (failed > 0) {
    manifest.state = "partial";
  } else {
    manifest.state = "complete";
  }
  if (result.scorecard) {
    const auto& card = *result.scorecard;
    write_atomic(run_dir / "scorecard.json", report::to_json_text(card));
    write_atomic(run_dir / "scorecard.csv", report::to_csv({card}));
    write_atomic(run_dir / "scorecard.md", report::to_markdown({card}));
  }
  write_atomic(run_dir / "aggregates.json", json(result.aggregates).dump(2) + "\n");
  executor.save_manifest();
  result.manifest = manifest;
  return result;
}

std::vector<Task> tasks_with_status(const std::vector<EvalRecord>& records, const RunManifest& manifest,
                                    const std::vector<std::string>& names, bool include_failed) {
  std::vector<Task> tasks;
  for (const auto& r : records) {
    const auto& rec = manifest.records.at(r.id);
    for (const auto& name : names) {
      auto it = rec.tasks.find(name);
      Status s = it == rec.tasks.end() ? Status::Pending : it->second;
      if (s == Status::Pending || (include_failed && s == Status::Failed)) tasks.push_back({&r, name});
    }
  }
  return tasks;
}

}  // namespace

Aggregation aggregate_run(const fs::path& run_dir, const RunManifest& manifest,
                          const std::string& model_id, score::AggregationMode mode) {
  std::vector<std::string> techniques = manifest.settings.at("techniques").get<std::vector<std::string>>();
  const bool hallucination = manifest.settings.value("hallucination", false);

  auto collect = [&](const std::string& task, std::size_t& failed) {
    std::vector<MetricBundle> bundles;
    for (const auto& [id, rec] : manifest.records) {
      auto it = rec.tasks.find(task);
      if (it == rec.tasks.end()) continue;
      if (it->second == Status::Done || it->second == Status::Partial) {
        bundles.push_back(json::parse(read_file(metrics_path(run_dir, id, task))).get<MetricBundle>());
      } else if (it->second == Status::Failed) {
        ++failed;
      }
    }
    return bundles;
  };

  Aggregation out;
  Scorecard card;
  card.model_id = model_id;
  card.n_records = manifest.records.size();
  for (const auto& name : techniques) {
    const TechniqueKind kind = parse_technique(name);
    std::size_t failed = 0;
    auto bundles = collect(name, failed);
    score::TechniqueAggregate agg;
    agg.technique = kind;
    agg.mode = mode;
    try {
      agg = score::overall_score(bundles, mode);
      agg.technique = kind;
      card.per_technique[kind] = agg.overall_score_pct;
    } catch (const EmptyAggregateError&) {
      agg.n_excluded = bundles.size();
      spdlog::warn("technique {}: no complete bundles", name);
    }
    agg.n_excluded += failed;
    out.aggregates.push_back(agg);
  }
  if (hallucination) {
    std::size_t failed = 0;
    auto bundles = collect(std::string(kPlainTask), failed);
    try {
      card.hallucination_pct = score::hallucination_pct(bundles);
    } catch (const EmptyAggregateError&) {
      spdlog::warn("no complete bundles for the hallucination column");
    }
  }
  if (card.hallucination_pct && score::has_all_scored_techniques(card.per_technique)) {
    std::map<TechniqueKind, double> five;
    for (auto k : kScoredTechniques) five[k] = card.per_technique.at(k);
    try {
      card.model_score = score::model_score(five, *card.hallucination_pct);
    } catch (const PreconditionError& e) {
      spdlog::warn("model score not computed: {}", e.what());
    }
  }
  out.scorecard = card;
  return out;
}

RunResult run(const RunConfig& config, const RunOptions& options) {
  validate_config(config);
  const fs::path run_dir(config.output_dir);
  auto data = load_dataset(config);
  fs::create_directories(run_dir);

  RunManifest manifest;
  manifest.settings = determinism_settings(config);
  manifest.config_hash = to_hex(sha256(manifest.settings.dump()));
  manifest.dataset = data.manifest;
  manifest.prompts = prompt_snapshot(config);
  manifest.started_at = utc_now();
  const auto names = task_names(config);
  for (const auto& r : data.records) {
    RecordStatus rs;
    for (const auto& n : names) rs.tasks[n] = Status::Pending;
    manifest.records[r.id] = std::move(rs);
  }

  Executor executor(config, run_dir, manifest, options);
  executor.save_manifest();
  auto tasks = tasks_with_status(data.records, manifest, names, false);
  std::size_t executed = 0;
  try {
    executed = executor.execute(tasks);
  } catch (...) {
    manifest.state = "aborted";
    executor.save_manifest();
    throw;
  }
  return finish(config, run_dir, manifest, executor, executed);
}

RunResult resume(const RunConfig& config, const fs::path& run_dir_arg, const RunOptions& options) {
  validate_config(config);
  const fs::path run_dir = run_dir_arg.empty() ? fs::path(config.output_dir) : run_dir_arg;
  const fs::path manifest_path = run_dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw IoError("no manifest at " + manifest_path.string());
  RunManifest manifest = read_manifest(manifest_path);

  json settings = determinism_settings(config);
  if (to_hex(sha256(settings.dump())) != manifest.config_hash) {
    auto changed = changed_settings(manifest.settings, settings);
    std::string list;
    for (const auto& c : changed) list += (list.empty() ? "" : ", ") + c;
    throw ResumeMismatchError(changed, "configuration changed since the run started: " + list);
  }

  auto data = load_dataset(config);
  if (data.manifest.selected_ids != manifest.dataset.selected_ids) {
    throw ResumeMismatchError({"dataset"}, "dataset selection differs from the manifest");
  }
  const auto names = task_names(config);
  for (const auto& r : data.records) {
    auto& rs = manifest.records[r.id];
    for (const auto& n : names) rs.tasks.try_emplace(n, Status::Pending);
  }

  Executor executor(config, run_dir, manifest, options);
  auto tasks = tasks_with_status(data.records, manifest, names, true);
  manifest.state = "running";
  std::size_t executed = 0;
  try {
    executed = executor.execute(tasks);
  } catch (...) {
    manifest.state = "aborted";
    executor.save_manifest();
    throw;
  }
  return finish(config, run_dir, manifest, executor, executed);
}

}  // namespace bell::pipeline
