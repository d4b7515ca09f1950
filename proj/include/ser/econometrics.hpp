// Signal evaluation: quintile long-short sorting with delayed execution,
// factor-alpha regression, and Fama-MacBeth cross-sections with Newey-West
// standard errors.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ser/dates.hpp"

namespace ser {

// Realized returns keyed by (period, stock), aligned on a period calendar.
class ReturnsPanel {
 public:
  void add(Date period, int64_t stock_id, double ret);
  void finalize();  // sorts the calendar

  const std::vector<Date>& calendar() const { return calendar_; }
  int period_index(Date d) const;
  std::optional<double> ret(Date period, int64_t stock_id) const;
  std::optional<double> ret_at(int period_index, int64_t stock_id) const;

  // Mean return over the `window` trading periods ending at `asof` inclusive;
  // nullopt when fewer than `window` observations exist.
  std::optional<double> trailing_mean(Date asof, int64_t stock_id, int window) const;

 private:
  std::vector<Date> calendar_;
  std::unordered_map<int32_t, std::unordered_map<int64_t, double>> by_period_;
  bool finalized_ = false;
};

// Prediction signals per formation period.
struct SignalCrossSection {
  Date period;
  std::vector<int64_t> stock;
  std::vector<double> signal;
};

struct SignalPanel {
  std::vector<SignalCrossSection> periods;  // sorted by period
  int periods_per_year = 252;
};

struct QuintileAssignment {
  std::vector<int> group;  // 1 (lowest signal) .. 5 (highest), aligned with input
  double long_short = 0.0;
  std::vector<double> group_mean_return;  // length 5
};

// Ranks by prediction ascending with stock-id tie break, splits into five
// contiguous groups sized floor(n/5) with the first n%5 groups one larger,
// and returns equal-weighted top-minus-bottom realized return. Throws when
// fewer than 5 names are available.
QuintileAssignment quintile_sort(std::span<const int64_t> stocks,
                                 std::span<const double> predictions,
                                 std::span<const double> realized);

struct LongShortSeries {
  std::vector<Date> dates;  // formation periods
  std::vector<double> ret;
  int periods_per_year = 252;
  int skipped_periods = 0;  // cross-sections below 5 names
};

// Portfolios formed on the signal at period t earn the realized return k
// return-periods after t (k = 1 is the immediate next-period spread).
LongShortSeries delayed_series(const SignalPanel& signals, const ReturnsPanel& returns, int k);

inline LongShortSeries long_short_series(const SignalPanel& signals, const ReturnsPanel& returns) {
  return delayed_series(signals, returns, 1);
}

struct PerfStats {
  double mean = 0.0;
  double annualized_return = 0.0;
  double t_stat = 0.0;
  double sharpe = 0.0;
  bool sharpe_defined = false;
  int periods = 0;
};

PerfStats performance(const LongShortSeries& series);

struct FactorRow {
  Date date;
  double mktrf = 0, smb = 0, hml = 0, rmw = 0, cma = 0, rf = 0;
};

struct AlphaResult {
  double alpha = 0.0;             // per period
  double alpha_annualized = 0.0;
  double t_stat = 0.0;            // heteroskedasticity-robust (HC1)
  std::vector<double> loadings;   // factor betas in file order
  int periods = 0;
};

// OLS of the spread on [1, MKT-RF, SMB, HML, RMW, CMA]; the spread is a
// zero-investment portfolio so no RF is subtracted.
AlphaResult factor_alpha(const LongShortSeries& series, std::span<const FactorRow> factors);

// Bartlett-kernel HAC standard error of the series mean:
// sqrt((g0 + 2 * sum w_j g_j) / T), w_j = 1 - j/(lags+1), g_j autocovariances
// computed with 1/T scaling.
double newey_west_se(std::span<const double> series, int lags);

struct FMCoef {
  std::string name;
  double mean = 0.0;
  double se = 0.0;  // Newey-West on the coefficient series
  double t_stat = 0.0;
  int periods_used = 0;
};

struct FMResult {
  std::vector<FMCoef> coefficients;  // intercept first
  int periods = 0;
  double avg_adj_r2 = 0.0;
  std::vector<std::string> warnings;
};

// One cross-sectional regression input: realized returns on predictors.
struct FMCrossSection {
  Date period;
  std::vector<double> y;
  std::vector<std::vector<double>> x;  // one column per predictor
};

// Per-period OLS with intercept; predictors optionally standardized within
// each cross-section. Periods with constant predictors or singular designs
// are dropped with a warning.
FMResult fama_macbeth(std::span<const FMCrossSection> sections,
                      std::span<const std::string> predictor_names, bool standardize,
                      int nw_lags = 11);

// Plain OLS via normal equations; throws on rank deficiency.
std::vector<double> ols(const std::vector<std::vector<double>>& x_cols,
                        std::span<const double> y, bool add_intercept);

// Two-sided p-value of a t statistic with df degrees of freedom.
double student_t_two_sided_p(double t, int df);

}  // namespace ser
