// Entity-driven comovement: TF-IDF exposure, TOP-K portfolios, shock-day
// detection, event-vs-baseline pairwise-correlation differences, leave-one-out
// contributions and importance grouping.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ser/dates.hpp"
#include "ser/econometrics.hpp"
#include "ser/events.hpp"

namespace ser {

struct ExposureMatrix {
  // entity token -> (firm -> exposure weight)
  std::unordered_map<int32_t, std::unordered_map<int64_t, double>> by_entity;
  int64_t n_docs = 0;
};

// Exposure_{i,e} = TF_{i,e} * ln((1 + N_docs) / (1 + DF_e)); TF counts entity
// occurrences (subject or object role) in firm i's event history, DF_e counts
// firms mentioning e at least once, N_docs counts firm-period observations.
ExposureMatrix exposure(const Panel& panel);

// K firms by descending exposure to `entity`, ties by firm id. When fewer
// than K firms have positive exposure all of them are returned and a warning
// is appended.
std::vector<int64_t> top_k_portfolio(int32_t entity, const ExposureMatrix& exposures, int k,
                                     std::vector<std::string>* warnings = nullptr);

struct ShockCalendar {
  int32_t entity = 0;
  std::vector<Date> shock_days;
};

struct ShockConfig {
  int min_firms = 3;
  int shift = 1;       // trading days between news day and shock day
  int min_shocks = 5;  // entities below this are dropped
  std::vector<int32_t> aliases;  // extra tokens counting as the focal entity
};

// A news day qualifies when at least min_firms portfolio firms carry an event
// whose subject or object is the focal entity (or an alias); the shock day is
// the news day shifted forward on the trading calendar. Returns nullopt when
// fewer than min_shocks survive.
std::optional<ShockCalendar> detect_shocks(int32_t entity, std::span<const int64_t> portfolio,
                                           const Panel& panel, const TradingCalendar& calendar,
                                           const ShockConfig& cfg = {});

// Mean pairwise Pearson correlation across columns of `window` (rows = days,
// cols = firms). Pairs with zero variance or missing data in the window are
// skipped and counted.
double mean_pairwise_correlation(const std::vector<std::vector<double>>& window,
                                 int* pairs_skipped = nullptr);

struct ComoveResult {
  int32_t entity = 0;
  int tau = 0;
  double rho_event = 0.0;
  double rho_base = 0.0;
  double delta_rho = 0.0;
  double p_value = 1.0;  // two-sided t-test on per-shock deltas
  int shocks_used = 0;
  int pairs_skipped = 0;
  std::vector<double> per_shock_event_rho;
  std::vector<double> per_shock_delta;
  std::vector<Date> shock_dates;
};

struct ComoveWindowConfig {
  int baseline_days = 10;  // each flank
  int pad_days = 5;
};

// Per shock: event window [t - tau, t + tau] on the trading calendar versus
// the two baseline flanks [t-tau-pad-base, t-tau-pad) and (t+tau+pad,
// t+tau+pad+base]. Shocks without enough calendar room are dropped.
ComoveResult delta_rho(const ReturnsPanel& returns, std::span<const int64_t> portfolio,
                       const ShockCalendar& shocks, int tau, const ComoveWindowConfig& wcfg = {});

struct LeaveOneOutRow {
  Date shock;
  double post_corr_drop_pct = 0.0;   // (full - reduced)/full * 100 on mean event-window rho
  double delta_drop_pct = 0.0;       // same on mean delta rho
};

// Requires >= 2 shocks in `result`.
std::vector<LeaveOneOutRow> leave_one_out(const ComoveResult& result);

enum class GroupScheme { equal, value };

// 0 = High, 1 = Mid, 2 = Low. Equal: three near-equal rank groups (larger
// groups first). Value: High >= hi, Mid in [lo, hi), Low < lo.
std::vector<int> group_entities(std::span<const double> scores, GroupScheme scheme,
                                double hi = 0.0015, double lo = 0.0010);

}  // namespace ser
