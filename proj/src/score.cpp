#include "bell/score.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <spdlog/spdlog.h>

#include "bell/errors.hpp"

namespace bell::score {

std::string_view to_string(AggregationMode mode) {
  return mode == AggregationMode::Printed ? "printed" : "mean";
}

AggregationMode parse_mode(std::string_view name) {
  if (name == "printed") return AggregationMode::Printed;
  if (name == "mean") return AggregationMode::Mean;
  throw ConfigError("aggregation mode must be printed or mean, not '" + std::string(name) + "'");
}

RecordScore per_record_score(const MetricBundle& bundle, AggregationMode mode) {
  if (!bundle.complete()) {
    throw PreconditionError("partial bundle for record " + bundle.record_id + " cannot be scored");
  }
  const double cos = std::max(0.0, bundle.cosine_similarity);
  RecordScore out;
  if (mode == AggregationMode::Mean) {
    out.value = (bundle.coherence + (1.0 - bundle.uncertainty) + cos) / 3.0;
    return out;
  }
  double denom = bundle.uncertainty + cos;
  if (denom < kDenominatorEpsilon) {
    denom = kDenominatorEpsilon;
    out.epsilon_guarded = true;
  }
  out.value = bundle.coherence / denom;
  if (out.value > kPrintedCap) {
    out.value = kPrintedCap;
    out.capped = true;
  }
  if (out.epsilon_guarded || out.capped) {
    spdlog::info("record {}: printed score {} (epsilon guard: {}, capped: {})", bundle.record_id,
                 out.value, out.epsilon_guarded, out.capped);
  }
  return out;
}

void to_json(json& j, const TechniqueAggregate& a) {
  j = json{{"technique", task_name(a.technique)},
           {"overall_score_pct", a.overall_score_pct},
           {"n_included", a.n_included},
           {"n_excluded", a.n_excluded},
           {"mode", std::string(to_string(a.mode))},
           {"epsilon_guards", a.epsilon_guards},
           {"caps", a.caps}};
}

namespace {

void sort_by_record(std::vector<MetricBundle>& bundles) {
  std::stable_sort(bundles.begin(), bundles.end(),
                   [](const MetricBundle& a, const MetricBundle& b) { return a.record_id < b.record_id; });
}

}  // namespace

TechniqueAggregate overall_score(std::vector<MetricBundle> bundles, AggregationMode mode) {
  sort_by_record(bundles);
  TechniqueAggregate agg;
  agg.mode = mode;
  if (!bundles.empty()) agg.technique = bundles.front().technique;
  double sum = 0.0;
  for (const auto& b : bundles) {
    if (!b.complete()) {
      ++agg.n_excluded;
      continue;
    }
    RecordScore s = per_record_score(b, mode);
    sum += s.value;
    ++agg.n_included;
    agg.epsilon_guards += s.epsilon_guarded ? 1 : 0;
    agg.caps += s.capped ? 1 : 0;
  }
  if (agg.n_included == 0) {
    throw EmptyAggregateError("no complete metric bundles to aggregate (" +
                              std::to_string(agg.n_excluded) + " partial)");
  }
  agg.overall_score_pct = 100.0 * sum / static_cast<double>(agg.n_included);
  return agg;
}

double hallucination_pct(std::vector<MetricBundle> bundles) {
  sort_by_record(bundles);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& b : bundles) {
    if (!b.complete()) continue;
    sum += b.hallucination;
    ++n;
  }
  if (n == 0) throw EmptyAggregateError("no complete bundles for the hallucination score");
  return 100.0 * sum / static_cast<double>(n);
}

bool has_all_scored_techniques(const std::map<TechniqueKind, double>& per_technique) {
  return std::all_of(kScoredTechniques.begin(), kScoredTechniques.end(),
                     [&](TechniqueKind k) { return per_technique.count(k) != 0; });
}

double model_score(const std::map<TechniqueKind, double>& per_technique, double hallucination_pct) {
  if (!(hallucination_pct >= 0.0 && hallucination_pct <= 100.0)) {
    throw PreconditionError("hallucination percentage outside [0,100]");
  }
  double sum = 100.0 - hallucination_pct;
  for (TechniqueKind k : kScoredTechniques) {
    auto it = per_technique.find(k);
    if (it == per_technique.end()) {
      throw IncompleteScorecardError("model score needs a " + std::string(to_string(k)) + " score");
    }
    if (!(it->second >= 0.0 && it->second <= 100.0 * kPrintedCap)) {
      throw PreconditionError(std::string(to_string(k)) + " score outside [0,150]");
    }
    sum += it->second;
  }
  return sum / 6.0;
}

double round_half_up(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  const double scaled = value * scale;
  // Nudge by a few ulps so that decimal ties stored just below .5 round up.
  const double nudge = std::max(1e-9, std::abs(scaled) * 4 * std::numeric_limits<double>::epsilon());
  return std::floor(scaled + 0.5 + nudge) / scale;
}

std::string format_2dp(double value) {
  char buf[64];
  double r = round_half_up(value, 2);
  if (r == 0.0) r = 0.0;  // no "-0.00"
  std::snprintf(buf, sizeof buf, "%.2f", r);
  return buf;
}

}  // namespace bell::score
