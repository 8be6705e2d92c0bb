#pragma once

// Aggregation of metric bundles into technique scores and the model score.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bell/core.hpp"

namespace bell::score {

/// Printed: coherence / (uncertainty + cosine). Mean: average of
/// coherence, 1 − uncertainty and cosine. Cosine is clamped at 0 in both.
enum class AggregationMode { Printed, Mean };

std::string_view to_string(AggregationMode mode);
AggregationMode parse_mode(std::string_view name);

inline constexpr double kDenominatorEpsilon = 1e-6;
inline constexpr double kPrintedCap = 1.5;

struct RecordScore {
  double value = 0.0;
  bool epsilon_guarded = false;  // denominator raised to kDenominatorEpsilon
  bool capped = false;           // value clamped to kPrintedCap
};

/// Throws PreconditionError for a partial bundle.
RecordScore per_record_score(const MetricBundle& bundle, AggregationMode mode);

struct TechniqueAggregate {
  std::optional<TechniqueKind> technique;
  double overall_score_pct = 0.0;
  std::size_t n_included = 0;
  std::size_t n_excluded = 0;
  AggregationMode mode = AggregationMode::Printed;
  std::size_t epsilon_guards = 0;
  std::size_t caps = 0;
};

void to_json(json& j, const TechniqueAggregate& a);

/// 100 × mean per-record score over complete bundles, summed in ascending
/// record-id order. Throws EmptyAggregateError without a complete bundle.
TechniqueAggregate overall_score(std::vector<MetricBundle> bundles, AggregationMode mode);

/// 100 × mean hallucination over complete bundles, in record-id order.
double hallucination_pct(std::vector<MetricBundle> bundles);

/// Mean of the five scored technique percentages and 100 − hallucination_pct.
/// Unrounded. Throws IncompleteScorecardError when a scored technique is
/// missing and PreconditionError for out-of-range inputs.
double model_score(const std::map<TechniqueKind, double>& per_technique, double hallucination_pct);

bool has_all_scored_techniques(const std::map<TechniqueKind, double>& per_technique);

/// Half-up rounding at `decimals` places, tolerant of binary representation
/// error (84.145 rounds to 84.15).
double round_half_up(double value, int decimals = 2);

/// round_half_up then fixed two-decimal formatting.
std::string format_2dp(double value);

}  // namespace bell::score
