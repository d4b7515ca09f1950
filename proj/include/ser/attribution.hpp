// Gradient x input importance at event and entity level, with absolute and
// polarity aggregation.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ser/model.hpp"

namespace ser {

enum class FeatureLevel { event, entity };

struct FeatureKey {
  enum class Kind : uint8_t { event, entity_subject, entity_object, cls_token, stock_token };
  Kind kind = Kind::event;
  // event: subject/action/object tokens; entity_*: token in `a`.
  int32_t a = 0, b = 0, c = 0;

  auto operator<=>(const FeatureKey&) const = default;

  // "subject-action-object" or the entity key; token ids resolved in `vocab`.
  std::string label(const VocabBundle& vocab) const;
};

struct ImportanceRecord {
  FeatureKey feature;
  int64_t stock_id = 0;
  Date period;
  double score = 0.0;  // signed, summed over embedding dimensions
};

// Forward + backward for one observation; one record per live feature
// occurrence. PAD slots emit nothing. With include_aux the CLS and stock
// token contributions are reported as well (their sum completes the Euler
// identity for linear configurations).
std::vector<ImportanceRecord> local_importance(const ModelConfig& cfg, const ModelParams& params,
                                               const FirmPeriodObservation& obs,
                                               int32_t stock_index, FeatureLevel level,
                                               bool include_aux = false);

// Runs local_importance over every observation. Parallel across observations;
// output order is deterministic (panel order).
std::vector<ImportanceRecord> attribute_panel(const ModelConfig& cfg, const ModelParams& params,
                                              const Panel& panel,
                                              const std::vector<int32_t>& stock_indices,
                                              FeatureLevel level, bool parallel = true);

struct AggregateImportance {
  FeatureKey feature;
  double abs_importance = 0.0;  // mean |score| (sum when sum_scores is set)
  double pos_pct = 0.0;         // share of absolute mass from positive scores
  double neg_pct = 0.0;
  double signed_mean = 0.0;
  int64_t freq = 0;
};

// Groups records by feature, drops groups below min_freq, sorts by
// abs_importance descending with key ties broken deterministically.
std::vector<AggregateImportance> aggregate(std::span<const ImportanceRecord> records,
                                           int64_t min_freq, bool sum_scores = false);

struct PolarityTables {
  std::vector<AggregateImportance> positive;  // top signed means, descending
  std::vector<AggregateImportance> negative;  // bottom signed means, ascending
};

PolarityTables polarity_tables(std::span<const AggregateImportance> aggregates, std::size_t top_n);

}  // namespace ser
