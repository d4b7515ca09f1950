// Domain types for events, vocabularies and firm-period panels, plus the
// deterministic processing steps that turn raw extracted events into model
// inputs: entity canonicalization, action normalization, deduplication,
// weekly compounding, observation assembly and rolling splits.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ser/dates.hpp"

namespace ser {

// One extracted (subject, action, object) with links and context sentence.
// Empty link strings mean "absent".
struct EventTriplet {
  std::string subject;
  std::string subject_link;
  std::string action;
  std::string object;
  std::string object_link;
  std::string context;
};

struct CanonicalEvent {
  int32_t subject_token = 0;
  int32_t action_token = 0;
  int32_t object_token = 0;

  auto operator<=>(const CanonicalEvent&) const = default;
};

// Dense id <-> canonical-key bijection with occurrence counts. Ids 0 and 1
// are reserved for PAD and UNK. Construction is single-writer; the built
// table is immutable afterwards and safe to share across threads.
class Vocabulary {
 public:
  static constexpr int32_t kPad = 0;
  static constexpr int32_t kUnk = 1;

  Vocabulary();

  // Returns the id for `key`, inserting with count 1 or bumping the count.
  int32_t intern(const std::string& key);
  std::optional<int32_t> lookup(const std::string& key) const;
  // Bulk count adjustment, used when deserializing.
  void add_count(int32_t id, int64_t extra);

  const std::string& key(int32_t id) const;
  int64_t count(int32_t id) const;
  int32_t size() const { return static_cast<int32_t>(keys_.size()); }

 private:
  std::vector<std::string> keys_;
  std::vector<int64_t> counts_;
  std::unordered_map<std::string, int32_t> index_;
};

// Dense index for external integer stock identifiers; index 0 is UNK.
class StockVocab {
 public:
  static constexpr int32_t kUnk = 0;

  StockVocab();
  int32_t intern(int64_t stock_id);
  int32_t lookup(int64_t stock_id) const;  // kUnk when unseen
  int64_t external(int32_t idx) const { return ids_[static_cast<std::size_t>(idx)]; }
  int32_t size() const { return static_cast<int32_t>(ids_.size()); }

 private:
  std::vector<int64_t> ids_;
  std::unordered_map<int64_t, int32_t> index_;
};

struct VocabBundle {
  Vocabulary entities;
  Vocabulary actions;
  StockVocab stocks;
  std::vector<std::string> warnings;
};

// Fixed-width day slice: n_max token triplets plus a validity mask. Padded
// slots hold PAD tokens and mask = false.
struct DaySlice {
  std::vector<int32_t> subject;
  std::vector<int32_t> action;
  std::vector<int32_t> object;
  std::vector<uint8_t> mask;

  int n_max() const { return static_cast<int>(mask.size()); }
  int live_count() const;
};

struct FirmPeriodObservation {
  int64_t stock_id = 0;
  Date period;
  // One slice for daily mode, D slices (Monday..Friday) for weekly mode.
  std::vector<DaySlice> days;
  double target_return = 0.0;
};

enum class PanelMode { daily, weekly };

struct Panel {
  PanelMode mode = PanelMode::daily;
  std::vector<FirmPeriodObservation> observations;  // sorted by (period, stock)
  std::vector<Date> periods;                        // strictly increasing

  void finalize();  // sorts, deduplicates periods, checks uniqueness
};

// --------------------------------------------------------------------------
// Operations
// --------------------------------------------------------------------------

// Canonical key for an entity surface form and optional DBpedia-style link:
// decoded final path segment when the link is usable, else the lowercased
// whitespace-collapsed surface. Malformed links fall back to the surface key
// and append a warning.
std::string entity_canonical_key(const std::string& surface, const std::string& link,
                                 std::vector<std::string>* warnings = nullptr);

int32_t canonicalize_entity(const std::string& surface, const std::string& link, Vocabulary& vocab,
                            std::vector<std::string>* warnings = nullptr);

// Lowercase, strip punctuation and lemmatize each token with the shipped
// suffix rules and irregular-verb table. Deterministic; never fails.
std::string normalize_action(const std::string& raw);

int32_t canonicalize_action(const std::string& raw, Vocabulary& vocab);

// First occurrence of each identical triplet kept, order preserved.
std::vector<CanonicalEvent> dedupe_events(std::span<const CanonicalEvent> events);

// Term-frequency cosine similarity; empty articles compare as 0.
double tf_cosine(const std::unordered_map<std::string, int>& a,
                 const std::unordered_map<std::string, int>& b);

// Scans in order and drops any article whose cosine similarity with an
// already-kept earlier article exceeds `threshold`. Returns kept indices.
std::vector<std::size_t> dedupe_articles(const std::vector<std::vector<std::string>>& article_tokens,
                                         double threshold = 0.9);

// exp(sum(log1p(r))) - 1 over 1..5 daily returns; throws on r <= -1.
double compound_weekly(std::span<const double> daily_returns);

// Dedupes, truncates to n_max keeping first-seen order, pads with PAD.
DaySlice build_day_slice(std::span<const CanonicalEvent> events, int n_max);

FirmPeriodObservation build_observation(int64_t stock_id, Date period,
                                        std::span<const CanonicalEvent> raw_events, double target,
                                        int n_max);

struct RollingSplit {
  int train_year_begin = 0;
  int train_year_end = 0;  // inclusive
  int test_year_begin = 0;
  int test_year_end = 0;  // inclusive
  Panel train;
  Panel test;
};

// Sliding year windows stepping one test span at a time. With extend_tail the
// final third of the windows keeps its test years but the training window
// start stays anchored at that group's first window, so late training windows
// widen instead of sliding.
std::vector<RollingSplit> rolling_splits(const Panel& panel, int train_years, int test_years,
                                         bool extend_tail);

}  // namespace ser
