// File formats: raw event JSONL, canonical panel JSONL, vocab JSON, returns /
// factors / signal CSV, and command summaries.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "ser/econometrics.hpp"
#include "ser/events.hpp"

namespace ser {

// One line of the raw event panel: surface-form events for a stock-date.
struct RawObservationRow {
  int64_t stock_id = 0;
  Date date;
  std::vector<EventTriplet> events;
  std::optional<double> target_return;
};

std::vector<RawObservationRow> read_events_jsonl(const std::string& path);
void write_events_jsonl(const std::string& path, std::span<const RawObservationRow> rows);

struct ReturnRow {
  Date date;
  int64_t stock_id = 0;
  double ret = 0.0;
};

std::vector<ReturnRow> read_returns_csv(const std::string& path);
void write_returns_csv(const std::string& path, std::span<const ReturnRow> rows);
ReturnsPanel to_returns_panel(std::span<const ReturnRow> rows);

std::vector<FactorRow> read_factors_csv(const std::string& path);
void write_factors_csv(const std::string& path, std::span<const FactorRow> rows);

struct SignalRow {
  Date date;
  int64_t stock_id = 0;
  double signal = 0.0;
};

std::vector<SignalRow> read_signal_csv(const std::string& path);
void write_signal_csv(const std::string& path, std::span<const SignalRow> rows);

// Canonical panel persisted as a JSON header line plus one JSON line per
// observation (live events only; padding is reapplied on load).
void write_panel_jsonl(const std::string& path, const Panel& panel, int n_max, int days_per_week);
Panel read_panel_jsonl(const std::string& path, int* n_max_out = nullptr,
                       int* days_per_week_out = nullptr);

void write_vocab_json(const std::string& path, const VocabBundle& vocab);
VocabBundle read_vocab_json(const std::string& path);

// Generic CSV emission; all doubles flow through format_double.
void write_csv(const std::string& path, std::span<const std::string> header,
               const std::vector<std::vector<std::string>>& rows);

// Summary JSON: `payload` is written as-is, wall-clock metadata is confined
// to the "meta" field so payloads stay byte-stable across runs.
void write_summary(const std::string& path, const std::string& command, nlohmann::json payload);

}  // namespace ser
