#include <algorithm>
#include <map>
#include <regex>
#include <set>

#include <spdlog/spdlog.h>

#include "bell/elicit.hpp"
#include "bell/errors.hpp"

namespace bell::elicit {

std::string_view to_string(GotOp op) {
  switch (op) {
    case GotOp::Generate: return "generate";
    case GotOp::Score: return "score";
    case GotOp::Aggregate: return "aggregate";
    case GotOp::Refine: return "refine";
  }
  return "generate";
}

GotOp parse_got_op(std::string_view name) {
  if (name == "generate") return GotOp::Generate;
  if (name == "score") return GotOp::Score;
  if (name == "aggregate") return GotOp::Aggregate;
  if (name == "refine") return GotOp::Refine;
  throw ConfigError("unknown GoT operation '" + std::string(name) + "'");
}

void to_json(json& j, const GotPlan& plan) {
  json nodes = json::array();
  for (const auto& n : plan.nodes) {
    nodes.push_back({{"id", n.id}, {"operation", std::string(to_string(n.operation))}, {"params", n.params}});
  }
  json edges = json::array();
  for (const auto& e : plan.edges) edges.push_back({{"from", e.from}, {"to", e.to}});
  j = json{{"nodes", nodes}, {"edges", edges}};
}

void from_json(const json& j, GotPlan& plan) {
  plan.nodes.clear();
  plan.edges.clear();
  for (const auto& n : j.at("nodes")) {
    GotNode node;
    n.at("id").get_to(node.id);
    node.operation = parse_got_op(n.at("operation").get<std::string>());
    node.params = n.value("params", json::object());
    plan.nodes.push_back(std::move(node));
  }
  for (const auto& e : j.at("edges")) {
    plan.edges.push_back({e.at("from").get<std::string>(), e.at("to").get<std::string>()});
  }
}

GotPlan default_got_plan(int k) {
  if (k < 1) throw ConfigError("GoT branching factor must be >= 1");
  GotPlan plan;
  if (k == 1) {
    plan.nodes = {{"g1", GotOp::Generate, {{"k", 1}}}, {"refine", GotOp::Refine, json::object()}};
    plan.edges = {{"g1", "refine"}};
    return plan;
  }
  for (int i = 1; i <= k; ++i) {
    plan.nodes.push_back({"g" + std::to_string(i), GotOp::Generate, {{"k", 1}}});
  }
  for (int i = 1; i <= k; ++i) {
    plan.nodes.push_back({"s" + std::to_string(i), GotOp::Score, json::object()});
    plan.edges.push_back({"g" + std::to_string(i), "s" + std::to_string(i)});
  }
  plan.nodes.push_back({"agg", GotOp::Aggregate, {{"top", 2}}});
  for (int i = 1; i <= k; ++i) plan.edges.push_back({"s" + std::to_string(i), "agg"});
  plan.nodes.push_back({"refine", GotOp::Refine, json::object()});
  plan.edges.push_back({"agg", "refine"});
  return plan;
}

namespace {

int generate_k(const GotNode& node) {
  const auto& k = node.params.contains("k") ? node.params.at("k") : json(1);
  if (!k.is_number_integer()) throw ConfigError("GoT node '" + node.id + "': k must be an integer");
  return k.get<int>();
}

}  // namespace

std::vector<std::string> validate_plan(const GotPlan& plan) {
  if (plan.nodes.empty()) throw ConfigError("GoT plan has no nodes");
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < plan.nodes.size(); ++i) {
    const auto& node = plan.nodes[i];
    if (node.id.empty()) throw ConfigError("GoT node with empty id");
    if (!index.emplace(node.id, i).second) throw ConfigError("duplicate GoT node id '" + node.id + "'");
    if (node.operation == GotOp::Generate && generate_k(node) < 1) {
      throw ConfigError("GoT generate node '" + node.id + "' needs k >= 1");
    }
  }
  const std::size_t n = plan.nodes.size();
  std::vector<std::vector<std::size_t>> succ(n);
  std::vector<std::size_t> indegree(n, 0);
  std::set<std::pair<std::size_t, std::size_t>> seen_edges;
  for (const auto& e : plan.edges) {
    auto from = index.find(e.from);
    auto to = index.find(e.to);
    if (from == index.end() || to == index.end()) {
      throw ConfigError("GoT edge " + e.from + " -> " + e.to + " references an unknown node");
    }
    if (!seen_edges.emplace(from->second, to->second).second) continue;
    succ[from->second].push_back(to->second);
    ++indegree[to->second];
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = plan.nodes[i];
    if (node.operation == GotOp::Score && indegree[i] != 1) {
      throw ConfigError("GoT score node '" + node.id + "' needs exactly one predecessor");
    }
    if ((node.operation == GotOp::Refine || node.operation == GotOp::Aggregate) && indegree[i] == 0) {
      throw ConfigError("GoT " + std::string(to_string(node.operation)) + " node '" + node.id +
                        "' has no predecessor");
    }
  }
  std::size_t sinks = 0;
  for (std::size_t i = 0; i < n; ++i) sinks += succ[i].empty() ? 1 : 0;
  // Kahn's algorithm; the ready set is ordered by declaration index.
  std::vector<std::size_t> remaining = indegree;
  std::set<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i) {
    if (remaining[i] == 0) ready.insert(i);
  }
  std::vector<std::string> order;
  while (!ready.empty()) {
    std::size_t i = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(plan.nodes[i].id);
    for (std::size_t j : succ[i]) {
      if (--remaining[j] == 0) ready.insert(j);
    }
  }
  // A cycle can also leave zero sinks; report it first.
  if (order.size() != n) throw ConfigError("GoT plan contains a cycle");
  if (sinks != 1) {
    throw ConfigError("GoT plan must have exactly one sink node, found " + std::to_string(sinks));
  }
  return order;
}

std::optional<int> parse_got_score(std::string_view reply) {
  static const std::regex kInt(R"((\d+))");
  std::string text(reply);
  std::smatch m;
  if (!std::regex_search(text, m, kInt)) return std::nullopt;
  if (m[1].length() > 2) return std::nullopt;
  int v = std::stoi(m[1].str());
  if (v < 0 || v > 10) return std::nullopt;
  return v;
}

ExplanationTranscript run_got(Backend& backend, const BackendProfile& profile,
                              const EvalRecord& record, const GotPlan& plan,
                              const PromptConfig& config) {
  const std::vector<std::string> order = validate_plan(plan);
  {
    auto v = validate_record(record);
    if (!v.ok()) throw PreconditionError("invalid record '" + record.id + "'");
  }

  std::map<std::string, const GotNode*> nodes;
  std::map<std::string, std::vector<std::string>> preds;
  std::map<std::string, int> generate_ordinal;
  int generate_total = 0;
  for (const auto& node : plan.nodes) {
    nodes[node.id] = &node;
    if (node.operation == GotOp::Generate) generate_ordinal[node.id] = ++generate_total;
  }
  for (const auto& e : plan.edges) {
    auto& list = preds[e.to];
    if (std::find(list.begin(), list.end(), e.from) == list.end()) list.push_back(e.from);
  }
  // Predecessors in declaration order keep prompts independent of edge order.
  std::map<std::string, std::size_t> decl;
  for (std::size_t i = 0; i < plan.nodes.size(); ++i) decl[plan.nodes[i].id] = i;
  for (auto& [id, list] : preds) {
    std::sort(list.begin(), list.end(),
              [&](const std::string& a, const std::string& b) { return decl[a] < decl[b]; });
  }

  struct Result {
    std::string candidate;  // solution text this node stands for
    std::optional<double> score;
  };
  std::map<std::string, Result> results;

  ExplanationTranscript t;
  t.record_id = record.id;
  t.technique = TechniqueKind::Got;
  t.model_id = profile.model_id;
  t.temperature = profile.temperature;

  const std::string system =
      record.system_prompt.empty() ? config.default_system : record.system_prompt;
  const std::string question = "Question: " + record.question;

  for (const auto& id : order) {
    const GotNode& node = *nodes.at(id);
    const auto& inputs = preds[id];
    ChatRequest request;
    switch (node.operation) {
      case GotOp::Generate: {
        std::string user = question;
        if (!inputs.empty()) {
          user += "\n\nBuild on this earlier reasoning:";
          for (const auto& p : inputs) user += "\n\n" + results.at(p).candidate;
        }
        const int k = generate_k(node);
        if (k > 1) {
          user += "\n\nPropose " + std::to_string(k) +
                  " distinct candidate solutions, numbered, each reasoned independently.";
        } else {
          user += "\n\nThis is candidate solution " + std::to_string(generate_ordinal[id]) +
                  " of " + std::to_string(generate_total) +
                  ". Solve the problem with your own line of reasoning.";
        }
        user += "\n" + config.cot_trigger;
        request.messages = {{Role::System, system}, {Role::User, user}};
        break;
      }
      case GotOp::Score: {
        request.messages = {
            {Role::System, "You are a strict grader of solutions."},
            {Role::User, question + "\n\nProposed solution:\n" + results.at(inputs[0]).candidate +
                             "\n\nRate how correct and well reasoned the proposed solution is on "
                             "a scale from 0 to 10. Reply with a single integer."}};
        break;
      }
      case GotOp::Aggregate: {
        std::vector<std::pair<std::string, double>> ranked;
        for (const auto& p : inputs) {
          ranked.emplace_back(p, results.at(p).score.value_or(-1.0));
        }
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        std::size_t top = 2;
        if (node.params.contains("top") && node.params.at("top").is_number_integer()) {
          top = static_cast<std::size_t>(std::max(1, node.params.at("top").get<int>()));
        }
        ranked.resize(std::min(top, ranked.size()));
        std::string user = question + "\n\nCandidate solutions:";
        for (std::size_t i = 0; i < ranked.size(); ++i) {
          user += "\n\nCandidate " + std::to_string(i + 1) + ":\n" +
                  results.at(ranked[i].first).candidate;
        }
        user +=
            "\n\nMerge the strongest parts of these candidate solutions into one improved "
            "solution, explain the reasoning, and state the final answer.";
        request.messages = {{Role::System, system}, {Role::User, user}};
        break;
      }
      case GotOp::Refine: {
        std::string current;
        for (const auto& p : inputs) {
          if (!current.empty()) current += "\n\n";
          current += results.at(p).candidate;
        }
        request.messages = {
            {Role::System, system},
            {Role::User, question + "\n\nCurrent solution:\n" + current +
                             "\n\nReview this solution step by step, fix any errors, and give "
                             "the refined final answer."}};
        break;
      }
    }
    request.temperature = profile.temperature;
    ChatResponse response = backend.chat(profile, request);

    Result r;
    if (node.operation == GotOp::Score) {
      r.candidate = results.at(inputs[0]).candidate;
      auto score = parse_got_score(response.content);
      if (!score) {
        spdlog::warn("got: unparseable score from node {} for record {}", id, record.id);
        t.flags.push_back("got_score_unparseable:" + id);
      }
      r.score = score.value_or(0);
      t.node_scores[id] = *r.score;
    } else {
      r.candidate = response.content;
    }
    results[id] = r;

    TranscriptStep step;
    step.role = Role::Assistant;
    step.content = std::move(response.content);
    step.stage_label = "got:" + id;
    step.prompt = std::move(request.messages);
    step.logprobs = std::move(response.token_logprobs);
    t.steps.push_back(std::move(step));
  }

  // The sink is last in topological order.
  t.final_explanation = t.steps.back().content;
  return t;
}

}  // namespace bell::elicit
