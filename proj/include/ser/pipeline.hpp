// Command implementations behind the CLI: extract, synth, build, train,
// predict, attribute, sort, fmb, comove, topics. Each writes CSV outputs plus
// a JSON summary and returns 0 on success. Library-callable so tests can run
// the full pipeline in-process.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ser/extraction.hpp"
#include "ser/model.hpp"
#include "ser/synth.hpp"

namespace ser {

// Shared configuration; JSON round-trips through to_json/from_json.
struct RunConfig {
  ModelConfig model;

  // evaluation
  int min_freq_event = 2;
  int min_freq_entity = 5;
  int polarity_top_n = 20;
  int nw_lags = 11;
  int periods_per_year = 252;
  std::vector<int> delays = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<int> control_windows = {5, 10, 21};
  bool fmb_standardize = true;

  // comovement
  int top_k = 15;
  int min_firms = 3;
  int shift = 1;
  int min_shocks = 5;
  int focal_entities = 50;
  std::vector<int> taus = {0, 1, 2, 3, 4, 5, 6};
  double group_hi = 0.0015;
  double group_lo = 0.0010;

  // topics
  int lda_topics = 250;  // paper-scale default; desk runs override
  double lda_alpha = 0.0;  // 0 -> symmetric default 50/K
  double lda_beta = 0.01;
  int lda_iterations = 200;

  uint64_t seed = 42;

  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::string& path);
};

struct ArticleRow {
  std::string id;
  std::string date;
  std::optional<int64_t> stock_id;
  std::string text;
};

std::vector<ArticleRow> read_articles_jsonl(const std::string& path);

struct ExtractOptions {
  std::string articles_path;
  Provider provider;
  int max_attempts = 3;
  std::string out_events;   // outcome JSONL
  std::string out_summary;
};

int cmd_extract(const ExtractOptions& opts);

struct SynthOptions {
  SynthSpec spec;
  std::string out_dir;  // events.jsonl, returns.csv, manifest.json, summary
};

int cmd_synth(const SynthOptions& opts);

struct BuildOptions {
  std::string events_path;
  std::string returns_path;  // required for weekly mode; optional for daily
  PanelMode mode = PanelMode::daily;
  int n_max = 30;
  int days_per_week = 5;
  std::string out_dir;  // panel.jsonl, vocab.json, summary
};

int cmd_build(const BuildOptions& opts);

struct TrainOptions {
  std::string panel_path;
  std::string vocab_path;
  ModelConfig cfg;
  bool rolling = false;
  int train_years = 5;
  int test_years = 1;
  bool extend_tail = false;
  std::string out_dir;  // checkpoint(s), oos_signal.csv when rolling, summary
};

int cmd_train(const TrainOptions& opts);

struct PredictOptions {
  std::string checkpoint_path;
  std::string panel_path;
  std::string vocab_path;
  std::string out_signal;
  std::string out_summary;
};

int cmd_predict(const PredictOptions& opts);

struct AttributeOptions {
  std::string checkpoint_path;
  std::string panel_path;
  std::string vocab_path;
  int min_freq_event = 2;
  int min_freq_entity = 5;
  int polarity_top_n = 20;
  bool sum_scores = false;
  std::string out_dir;  // event/entity importance CSVs + polarity CSVs + summary
};

int cmd_attribute(const AttributeOptions& opts);

struct SortOptions {
  std::string signal_path;
  std::string returns_path;
  std::string factors_path;  // optional
  int periods_per_year = 252;
  std::vector<int> delays = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::string out_dir;  // long_short.csv, delayed.csv, summary
};

int cmd_sort(const SortOptions& opts);

struct FmbOptions {
  std::string signal_path;
  std::string returns_path;
  std::vector<int> control_windows = {5, 10, 21};
  bool standardize = true;
  int nw_lags = 11;
  std::string out_dir;  // coefficients.csv, summary
};

int cmd_fmb(const FmbOptions& opts);

struct ComoveOptions {
  std::string panel_path;
  std::string vocab_path;
  std::string returns_path;
  std::string entity_importance_path;  // CSV from cmd_attribute entity level
  int focal_entities = 50;
  int top_k = 15;
  int min_firms = 3;
  int shift = 1;
  int min_shocks = 5;
  std::vector<int> taus = {0, 1, 2, 3, 4, 5, 6};
  double group_hi = 0.0015;
  double group_lo = 0.0010;
  int loo_tau = 1;
  std::string out_dir;  // comove_windows.csv, comove_loo.csv, summary
};

int cmd_comove(const ComoveOptions& opts);

struct TopicsOptions {
  std::string events_path;  // raw events with contexts
  std::string panel_path;
  std::string vocab_path;
  std::string checkpoint_path;
  int topics = 25;
  double alpha = 0.0;  // 0 -> 50/K
  double beta = 0.01;
  int iterations = 200;
  int top_terms = 10;
  uint64_t seed = 42;
  std::string out_dir;  // topic_importance.csv, summary
};

int cmd_topics(const TopicsOptions& opts);

// Helpers shared by commands and tests.

// Canonical panel built from raw rows. Weekend dates roll forward to the next
// weekday; weekly mode groups by trading week with the target compounded from
// the following week's daily returns.
struct BuiltPanel {
  Panel panel;
  VocabBundle vocab;
  int skipped_rows = 0;
};

BuiltPanel build_panel(const std::vector<RawObservationRow>& rows, PanelMode mode, int n_max,
                       int days_per_week, const ReturnsPanel* returns);

// Signal cross-sections grouped by formation date.
SignalPanel to_signal_panel(const std::vector<SignalRow>& rows, int periods_per_year);

}  // namespace ser
