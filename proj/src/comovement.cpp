#include "ser/comovement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ser {

ExposureMatrix exposure(const Panel& panel) {
  if (panel.observations.empty()) throw std::invalid_argument("exposure: empty panel");

  ExposureMatrix out;
  out.n_docs = static_cast<int64_t>(panel.observations.size());

  // TF per (firm, entity) over the firm's whole event history.
  std::unordered_map<int32_t, std::unordered_map<int64_t, int64_t>> tf;
  for (const FirmPeriodObservation& obs : panel.observations) {
    for (const DaySlice& slice : obs.days) {
      for (int i = 0; i < slice.n_max(); ++i) {
        if (!slice.mask[static_cast<std::size_t>(i)]) continue;
        tf[slice.subject[static_cast<std::size_t>(i)]][obs.stock_id] += 1;
        tf[slice.object[static_cast<std::size_t>(i)]][obs.stock_id] += 1;
      }
    }
  }

  for (const auto& [entity, firms] : tf) {
    double idf = std::log((1.0 + static_cast<double>(out.n_docs)) /
                          (1.0 + static_cast<double>(firms.size())));
    auto& row = out.by_entity[entity];
    for (const auto& [firm, count] : firms) row[firm] = static_cast<double>(count) * idf;
  }
  return out;
}

std::vector<int64_t> top_k_portfolio(int32_t entity, const ExposureMatrix& exposures, int k,
                                     std::vector<std::string>* warnings) {
  if (k < 1) throw std::invalid_argument("top_k_portfolio: k must be >= 1");
  auto it = exposures.by_entity.find(entity);
  std::vector<std::pair<int64_t, double>> firms;
  if (it != exposures.by_entity.end()) {
    for (const auto& [firm, w] : it->second)
      if (w > 0.0) firms.emplace_back(firm, w);
  }
  std::sort(firms.begin(), firms.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<int>(firms.size()) < k && warnings)
    warnings->push_back("entity " + std::to_string(entity) + ": only " +
                        std::to_string(firms.size()) + " firms with positive exposure, wanted " +
                        std::to_string(k));
  if (static_cast<int>(firms.size()) > k) firms.resize(static_cast<std::size_t>(k));
  std::vector<int64_t> out;
  out.reserve(firms.size());
  for (const auto& [firm, w] : firms) out.push_back(firm);
  return out;
}

std::optional<ShockCalendar> detect_shocks(int32_t entity, std::span<const int64_t> portfolio,
                                           const Panel& panel, const TradingCalendar& calendar,
                                           const ShockConfig& cfg) {
  if (cfg.min_firms < 1) throw std::invalid_argument("detect_shocks: min_firms must be >= 1");
  std::unordered_set<int64_t> members(portfolio.begin(), portfolio.end());
  std::unordered_set<int32_t> focal = {entity};
  for (int32_t a : cfg.aliases) focal.insert(a);

  // news day -> portfolio firms hit
  std::map<Date, std::unordered_set<int64_t>> hits;
  for (const FirmPeriodObservation& obs : panel.observations) {
    if (!members.count(obs.stock_id)) continue;
    bool mentioned = false;
    for (const DaySlice& slice : obs.days) {
      for (int i = 0; i < slice.n_max() && !mentioned; ++i) {
        if (!slice.mask[static_cast<std::size_t>(i)]) continue;
        if (focal.count(slice.subject[static_cast<std::size_t>(i)]) ||
            focal.count(slice.object[static_cast<std::size_t>(i)]))
          mentioned = true;
      }
    }
    if (mentioned) hits[obs.period].insert(obs.stock_id);
  }

  ShockCalendar shocks;
  shocks.entity = entity;
  for (const auto& [news_day, firms] : hits) {
    if (static_cast<int>(firms.size()) < cfg.min_firms) continue;
    auto shock_day = calendar.shift_after(news_day, cfg.shift);
    if (!shock_day) continue;
    if (shocks.shock_days.empty() || shocks.shock_days.back() != *shock_day)
      shocks.shock_days.push_back(*shock_day);
  }
  if (static_cast<int>(shocks.shock_days.size()) < cfg.min_shocks) return std::nullopt;
  return shocks;
}

double mean_pairwise_correlation(const std::vector<std::vector<double>>& window,
                                 int* pairs_skipped) {
  const std::size_t firms = window.empty() ? 0 : window[0].size();
  const std::size_t days = window.size();
  if (firms < 2 || days < 2)
    throw std::invalid_argument("mean_pairwise_correlation: need >= 2 firms and >= 2 days");

  double acc = 0.0;
  int used = 0, skipped = 0;
  for (std::size_t a = 0; a < firms; ++a) {
    for (std::size_t b = a + 1; b < firms; ++b) {
      double sa = 0.0, sb = 0.0;
      bool missing = false;
      for (std::size_t t = 0; t < days; ++t) {
        if (!std::isfinite(window[t][a]) || !std::isfinite(window[t][b])) {
          missing = true;
          break;
        }
        sa += window[t][a];
        sb += window[t][b];
      }
      if (missing) {
        ++skipped;
        continue;
      }
      double ma = sa / static_cast<double>(days), mb = sb / static_cast<double>(days);
      double cov = 0.0, va = 0.0, vb = 0.0;
      for (std::size_t t = 0; t < days; ++t) {
        double da = window[t][a] - ma, db = window[t][b] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
      }
      if (va <= 0.0 || vb <= 0.0) {
        ++skipped;
        continue;
      }
      acc += cov / std::sqrt(va * vb);
      ++used;
    }
  }
  if (pairs_skipped) *pairs_skipped += skipped;
  if (used == 0) throw std::runtime_error("mean_pairwise_correlation: no usable pairs");
  return acc / static_cast<double>(used);
}

namespace {

// Rows [begin, end] of the returns calendar for the portfolio, NaN when a
// firm has no return that day.
std::vector<std::vector<double>> window_rows(const ReturnsPanel& returns,
                                             std::span<const int64_t> portfolio, int begin,
                                             int end) {
  std::vector<std::vector<double>> rows;
  rows.reserve(static_cast<std::size_t>(end - begin + 1));
  for (int i = begin; i <= end; ++i) {
    std::vector<double> row;
    row.reserve(portfolio.size());
    for (int64_t firm : portfolio) {
      auto r = returns.ret_at(i, firm);
      row.push_back(r ? *r : std::numeric_limits<double>::quiet_NaN());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

ComoveResult delta_rho(const ReturnsPanel& returns, std::span<const int64_t> portfolio,
                       const ShockCalendar& shocks, int tau, const ComoveWindowConfig& wcfg) {
  if (tau < 0 || tau > 6) throw std::invalid_argument("delta_rho: tau must be in 0..6");
  if (portfolio.size() < 2) throw std::invalid_argument("delta_rho: portfolio needs >= 2 firms");

  ComoveResult res;
  res.entity = shocks.entity;
  res.tau = tau;

  const int n_periods = static_cast<int>(returns.calendar().size());
  for (Date shock : shocks.shock_days) {
    int t = returns.period_index(shock);
    if (t < 0) continue;
    int ev_lo = t - tau, ev_hi = t + tau;
    int left_hi = ev_lo - wcfg.pad_days - 1;
    int left_lo = left_hi - wcfg.baseline_days + 1;
    int right_lo = ev_hi + wcfg.pad_days + 1;
    int right_hi = right_lo + wcfg.baseline_days - 1;
    if (left_lo < 0 || right_hi >= n_periods) continue;  // not enough calendar room

    auto event_rows = window_rows(returns, portfolio, ev_lo, ev_hi);
    auto base_rows = window_rows(returns, portfolio, left_lo, left_hi);
    auto right_rows = window_rows(returns, portfolio, right_lo, right_hi);
    base_rows.insert(base_rows.end(), right_rows.begin(), right_rows.end());

    try {
      double rho_event = mean_pairwise_correlation(event_rows, &res.pairs_skipped);
      double rho_base = mean_pairwise_correlation(base_rows, &res.pairs_skipped);
      res.per_shock_event_rho.push_back(rho_event);
      res.per_shock_delta.push_back(rho_event - rho_base);
      res.shock_dates.push_back(shock);
    } catch (const std::exception&) {
      continue;  // degenerate window, e.g. all variance zero
    }
  }

  res.shocks_used = static_cast<int>(res.per_shock_delta.size());
  if (res.shocks_used == 0) throw std::runtime_error("delta_rho: no shock with enough calendar room");

  res.rho_event =
      std::accumulate(res.per_shock_event_rho.begin(), res.per_shock_event_rho.end(), 0.0) /
      res.shocks_used;
  double mean_delta =
      std::accumulate(res.per_shock_delta.begin(), res.per_shock_delta.end(), 0.0) /
      res.shocks_used;
  res.delta_rho = mean_delta;
  res.rho_base = res.rho_event - mean_delta;

  if (res.shocks_used >= 2) {
    double ss = 0.0;
    for (double d : res.per_shock_delta) ss += (d - mean_delta) * (d - mean_delta);
    double sd = std::sqrt(ss / static_cast<double>(res.shocks_used - 1));
    if (sd > 0.0) {
      double t_stat = mean_delta / (sd / std::sqrt(static_cast<double>(res.shocks_used)));
      res.p_value = student_t_two_sided_p(t_stat, res.shocks_used - 1);
    } else {
      res.p_value = mean_delta == 0.0 ? 1.0 : 0.0;
    }
  }
  return res;
}

std::vector<LeaveOneOutRow> leave_one_out(const ComoveResult& result) {
  const int n = result.shocks_used;
  if (n < 2) throw std::invalid_argument("leave_one_out: need at least 2 shocks");

  double full_post = result.rho_event;
  double full_delta = result.delta_rho;
  double sum_post =
      std::accumulate(result.per_shock_event_rho.begin(), result.per_shock_event_rho.end(), 0.0);
  double sum_delta =
      std::accumulate(result.per_shock_delta.begin(), result.per_shock_delta.end(), 0.0);

  std::vector<LeaveOneOutRow> rows;
  rows.reserve(static_cast<std::size_t>(n));
  for (int s = 0; s < n; ++s) {
    double reduced_post = (sum_post - result.per_shock_event_rho[static_cast<std::size_t>(s)]) /
                          static_cast<double>(n - 1);
    double reduced_delta = (sum_delta - result.per_shock_delta[static_cast<std::size_t>(s)]) /
                           static_cast<double>(n - 1);
    LeaveOneOutRow row;
    row.shock = result.shock_dates[static_cast<std::size_t>(s)];
    row.post_corr_drop_pct = full_post != 0.0 ? (full_post - reduced_post) / full_post * 100.0 : 0.0;
    row.delta_drop_pct =
        full_delta != 0.0 ? (full_delta - reduced_delta) / full_delta * 100.0 : 0.0;
    rows.push_back(row);
  }
  return rows;
}

std::vector<int> group_entities(std::span<const double> scores, GroupScheme scheme, double hi,
                                double lo) {
  const std::size_t n = scores.size();
  std::vector<int> labels(n, 2);
  if (scheme == GroupScheme::value) {
    for (std::size_t i = 0; i < n; ++i) {
      if (scores[i] >= hi)
        labels[i] = 0;
      else if (scores[i] >= lo)
        labels[i] = 1;
      else
        labels[i] = 2;
    }
    return labels;
  }

  // Equal: rank by score descending (index tie-break), split into three
  // near-equal groups with the larger groups first.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  std::size_t base = n / 3, extra = n % 3;
  std::size_t pos = 0;
  for (int g = 0; g < 3; ++g) {
    std::size_t size = base + (static_cast<std::size_t>(g) < extra ? 1 : 0);
    for (std::size_t i = 0; i < size && pos < n; ++i, ++pos) labels[order[pos]] = g;
  }
  return labels;
}

}  // namespace ser
