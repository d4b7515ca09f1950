#include "ser/econometrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ser {

// ----------------------------------------------------------------------------
// ReturnsPanel
// ----------------------------------------------------------------------------

void ReturnsPanel::add(Date period, int64_t stock_id, double ret) {
  if (finalized_) throw std::logic_error("returns panel already finalized");
  by_period_[period.serial][stock_id] = ret;
}

void ReturnsPanel::finalize() {
  calendar_.clear();
  calendar_.reserve(by_period_.size());
  for (const auto& [serial, stocks] : by_period_) calendar_.push_back(Date{serial});
  std::sort(calendar_.begin(), calendar_.end());
  finalized_ = true;
}

int ReturnsPanel::period_index(Date d) const {
  auto it = std::lower_bound(calendar_.begin(), calendar_.end(), d);
  if (it == calendar_.end() || *it != d) return -1;
  return static_cast<int>(it - calendar_.begin());
}

std::optional<double> ReturnsPanel::ret(Date period, int64_t stock_id) const {
  auto it = by_period_.find(period.serial);
  if (it == by_period_.end()) return std::nullopt;
  auto jt = it->second.find(stock_id);
  if (jt == it->second.end()) return std::nullopt;
  return jt->second;
}

std::optional<double> ReturnsPanel::ret_at(int period_index, int64_t stock_id) const {
  if (period_index < 0 || period_index >= static_cast<int>(calendar_.size())) return std::nullopt;
  return ret(calendar_[static_cast<std::size_t>(period_index)], stock_id);
}

std::optional<double> ReturnsPanel::trailing_mean(Date asof, int64_t stock_id, int window) const {
  int idx = period_index(asof);
  if (idx < 0 || idx + 1 < window) return std::nullopt;
  double acc = 0.0;
  for (int i = idx - window + 1; i <= idx; ++i) {
    auto r = ret_at(i, stock_id);
    if (!r) return std::nullopt;
    acc += *r;
  }
  return acc / static_cast<double>(window);
}

// ----------------------------------------------------------------------------
// Quintile sorting
// ----------------------------------------------------------------------------

QuintileAssignment quintile_sort(std::span<const int64_t> stocks,
                                 std::span<const double> predictions,
                                 std::span<const double> realized) {
  const std::size_t n = stocks.size();
  if (predictions.size() != n || realized.size() != n)
    throw std::invalid_argument("quintile_sort: misaligned inputs");
  if (n < 5) throw std::invalid_argument("quintile_sort: need at least 5 stocks, got " +
                                         std::to_string(n));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (predictions[a] != predictions[b]) return predictions[a] < predictions[b];
    return stocks[a] < stocks[b];
  });

  // floor(n/5) per group; the first n%5 groups (lowest signals) get one extra.
  const std::size_t base = n / 5, extra = n % 5;
  QuintileAssignment out;
  out.group.assign(n, 0);
  out.group_mean_return.assign(5, 0.0);
  std::size_t pos = 0;
  for (int g = 0; g < 5; ++g) {
    std::size_t size = base + (static_cast<std::size_t>(g) < extra ? 1 : 0);
    double acc = 0.0;
    for (std::size_t i = 0; i < size; ++i, ++pos) {
      out.group[order[pos]] = g + 1;
      acc += realized[order[pos]];
    }
    out.group_mean_return[static_cast<std::size_t>(g)] = acc / static_cast<double>(size);
  }
  out.long_short = out.group_mean_return[4] - out.group_mean_return[0];
  return out;
}

LongShortSeries delayed_series(const SignalPanel& signals, const ReturnsPanel& returns, int k) {
  if (k < 1) throw std::invalid_argument("delayed_series: k must be >= 1");
  LongShortSeries series;
  series.periods_per_year = signals.periods_per_year;
  for (const SignalCrossSection& cs : signals.periods) {
    int idx = returns.period_index(cs.period);
    if (idx < 0) continue;
    int target = idx + k;
    std::vector<int64_t> stocks;
    std::vector<double> preds, realized;
    for (std::size_t i = 0; i < cs.stock.size(); ++i) {
      auto r = returns.ret_at(target, cs.stock[i]);
      if (!r) continue;
      stocks.push_back(cs.stock[i]);
      preds.push_back(cs.signal[i]);
      realized.push_back(*r);
    }
    if (stocks.size() < 5) {
      if (target < static_cast<int>(returns.calendar().size())) series.skipped_periods += 1;
      continue;  // calendar exhaustion trims the tail silently
    }
    QuintileAssignment q = quintile_sort(stocks, preds, realized);
    series.dates.push_back(cs.period);
    series.ret.push_back(q.long_short);
  }
  return series;
}

// ----------------------------------------------------------------------------
// Performance statistics
// ----------------------------------------------------------------------------

PerfStats performance(const LongShortSeries& series) {
  const std::size_t t = series.ret.size();
  if (t < 2) throw std::invalid_argument("performance: need at least 2 periods");
  PerfStats stats;
  stats.periods = static_cast<int>(t);
  double mean = std::accumulate(series.ret.begin(), series.ret.end(), 0.0) / static_cast<double>(t);
  double ss = 0.0;
  for (double r : series.ret) ss += (r - mean) * (r - mean);
  double sd = std::sqrt(ss / static_cast<double>(t - 1));
  stats.mean = mean;
  stats.annualized_return = mean * series.periods_per_year;
  if (sd > 0.0) {
    stats.t_stat = mean / (sd / std::sqrt(static_cast<double>(t)));
    stats.sharpe = mean / sd * std::sqrt(static_cast<double>(series.periods_per_year));
    stats.sharpe_defined = true;
  }
  return stats;
}

// ----------------------------------------------------------------------------
// OLS and robust errors
// ----------------------------------------------------------------------------

namespace {

// Solves A x = b in place by Gaussian elimination with partial pivoting.
std::vector<double> solve_linear(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    if (std::fabs(a[pivot][col]) < 1e-12)
      throw std::runtime_error("ols: rank-deficient design matrix");
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
  return x;
}

struct OlsFit {
  std::vector<double> beta;
  std::vector<double> residuals;
  std::vector<std::vector<double>> design;  // row-major design matrix
  double r2 = 0.0, adj_r2 = 0.0;
};

OlsFit ols_fit(const std::vector<std::vector<double>>& x_cols, std::span<const double> y,
               bool add_intercept) {
  const std::size_t n = y.size();
  std::size_t k = x_cols.size() + (add_intercept ? 1 : 0);
  if (n < k) throw std::invalid_argument("ols: more regressors than observations");
  for (const auto& col : x_cols)
    if (col.size() != n) throw std::invalid_argument("ols: column length mismatch");

  std::vector<std::vector<double>> design(n, std::vector<double>(k));
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = 0;
    if (add_intercept) design[i][j++] = 1.0;
    for (const auto& col : x_cols) design[i][j++] = col[i];
  }

  std::vector<std::vector<double>> xtx(k, std::vector<double>(k, 0.0));
  std::vector<double> xty(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < k; ++a) {
      xty[a] += design[i][a] * y[i];
      for (std::size_t b = 0; b < k; ++b) xtx[a][b] += design[i][a] * design[i][b];
    }
  }

  OlsFit fit;
  fit.beta = solve_linear(xtx, xty);
  fit.residuals.resize(n);
  double y_mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double fitted = 0.0;
    for (std::size_t a = 0; a < k; ++a) fitted += design[i][a] * fit.beta[a];
    fit.residuals[i] = y[i] - fitted;
    sse += fit.residuals[i] * fit.residuals[i];
    sst += (y[i] - y_mean) * (y[i] - y_mean);
  }
  fit.r2 = sst > 0.0 ? 1.0 - sse / sst : 0.0;
  if (n > k)
    fit.adj_r2 = 1.0 - (1.0 - fit.r2) * static_cast<double>(n - 1) / static_cast<double>(n - k);
  fit.design = std::move(design);
  return fit;
}

// HC1 sandwich variance of one coefficient.
double robust_se(const OlsFit& fit, std::size_t coef) {
  const std::size_t n = fit.design.size();
  const std::size_t k = fit.beta.size();
  std::vector<std::vector<double>> xtx(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) xtx[a][b] += fit.design[i][a] * fit.design[i][b];

  // Invert via k solves.
  std::vector<std::vector<double>> inv(k);
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> e(k, 0.0);
    e[c] = 1.0;
    inv[c] = solve_linear(xtx, e);  // column c of (X'X)^-1
  }

  std::vector<std::vector<double>> meat(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    double u2 = fit.residuals[i] * fit.residuals[i];
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) meat[a][b] += u2 * fit.design[i][a] * fit.design[i][b];
  }

  // var = (X'X)^-1 meat (X'X)^-1, HC1 small-sample scaling.
  double var = 0.0;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) var += inv[a][coef] * meat[a][b] * inv[b][coef];
  var *= static_cast<double>(n) / static_cast<double>(n - k);
  return std::sqrt(var);
}

}  // namespace

std::vector<double> ols(const std::vector<std::vector<double>>& x_cols, std::span<const double> y,
                        bool add_intercept) {
  return ols_fit(x_cols, y, add_intercept).beta;
}

AlphaResult factor_alpha(const LongShortSeries& series, std::span<const FactorRow> factors) {
  std::unordered_map<int32_t, const FactorRow*> by_date;
  for (const FactorRow& f : factors) by_date[f.date.serial] = &f;

  std::vector<double> y;
  std::vector<std::vector<double>> cols(5);
  for (std::size_t i = 0; i < series.dates.size(); ++i) {
    auto it = by_date.find(series.dates[i].serial);
    if (it == by_date.end()) continue;
    const FactorRow& f = *it->second;
    y.push_back(series.ret[i]);
    cols[0].push_back(f.mktrf);
    cols[1].push_back(f.smb);
    cols[2].push_back(f.hml);
    cols[3].push_back(f.rmw);
    cols[4].push_back(f.cma);
  }
  if (y.size() < 7) throw std::invalid_argument("factor_alpha: too few aligned periods");

  OlsFit fit = ols_fit(cols, y, /*add_intercept=*/true);
  AlphaResult res;
  res.alpha = fit.beta[0];
  res.alpha_annualized = fit.beta[0] * series.periods_per_year;
  double se = robust_se(fit, 0);
  res.t_stat = se > 0.0 ? fit.beta[0] / se : 0.0;
  res.loadings.assign(fit.beta.begin() + 1, fit.beta.end());
  res.periods = static_cast<int>(y.size());
  return res;
}

double newey_west_se(std::span<const double> series, int lags) {
  const int t = static_cast<int>(series.size());
  if (lags < 0) throw std::invalid_argument("newey_west_se: negative lag count");
  if (t <= lags) throw std::invalid_argument("newey_west_se: need T > lags");
  double mean = std::accumulate(series.begin(), series.end(), 0.0) / t;

  auto gamma = [&](int j) {
    double acc = 0.0;
    for (int i = j; i < t; ++i)
      acc += (series[static_cast<std::size_t>(i)] - mean) *
             (series[static_cast<std::size_t>(i - j)] - mean);
    return acc / static_cast<double>(t);
  };

  double lrv = gamma(0);
  for (int j = 1; j <= lags; ++j) {
    double w = 1.0 - static_cast<double>(j) / static_cast<double>(lags + 1);
    lrv += 2.0 * w * gamma(j);
  }
  if (lrv < 0.0) lrv = 0.0;  // numerically possible for adversarial series
  return std::sqrt(lrv / static_cast<double>(t));
}

// ----------------------------------------------------------------------------
// Fama-MacBeth
// ----------------------------------------------------------------------------

FMResult fama_macbeth(std::span<const FMCrossSection> sections,
                      std::span<const std::string> predictor_names, bool standardize,
                      int nw_lags) {
  if (sections.empty()) throw std::invalid_argument("fama_macbeth: no cross-sections");
  const std::size_t n_pred = predictor_names.size();

  FMResult result;
  std::vector<std::vector<double>> coef_series(n_pred + 1);
  std::vector<double> adj_r2s;

  for (const FMCrossSection& cs : sections) {
    if (cs.x.size() != n_pred)
      throw std::invalid_argument("fama_macbeth: predictor count mismatch at " +
                                  cs.period.to_string());
    if (cs.y.size() <= n_pred + 1) {
      result.warnings.push_back("period " + cs.period.to_string() + " dropped: too few names");
      continue;
    }

    std::vector<std::vector<double>> cols = cs.x;
    bool degenerate = false;
    if (standardize) {
      for (std::vector<double>& col : cols) {
        double m = std::accumulate(col.begin(), col.end(), 0.0) / col.size();
        double ss = 0.0;
        for (double v : col) ss += (v - m) * (v - m);
        double sd = std::sqrt(ss / static_cast<double>(col.size() - 1));
        if (sd <= 0.0) {
          degenerate = true;
          break;
        }
        for (double& v : col) v = (v - m) / sd;
      }
    } else {
      for (const std::vector<double>& col : cols) {
        double mn = *std::min_element(col.begin(), col.end());
        double mx = *std::max_element(col.begin(), col.end());
        if (mn == mx) {
          degenerate = true;
          break;
        }
      }
    }
    if (degenerate) {
      result.warnings.push_back("period " + cs.period.to_string() +
                                " dropped: constant predictor");
      continue;
    }

    OlsFit fit;
    try {
      fit = ols_fit(cols, cs.y, /*add_intercept=*/true);
    } catch (const std::exception&) {
      result.warnings.push_back("period " + cs.period.to_string() + " dropped: singular design");
      continue;
    }
    for (std::size_t j = 0; j <= n_pred; ++j) coef_series[j].push_back(fit.beta[j]);
    adj_r2s.push_back(fit.adj_r2);
  }

  result.periods = static_cast<int>(coef_series[0].size());
  if (result.periods < 1) throw std::runtime_error("fama_macbeth: no usable periods");
  result.avg_adj_r2 =
      std::accumulate(adj_r2s.begin(), adj_r2s.end(), 0.0) / static_cast<double>(adj_r2s.size());

  for (std::size_t j = 0; j <= n_pred; ++j) {
    FMCoef coef;
    coef.name = j == 0 ? "intercept" : predictor_names[j - 1];
    const std::vector<double>& series = coef_series[j];
    coef.periods_used = static_cast<int>(series.size());
    coef.mean =
        std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(series.size());
    int lags = std::min(nw_lags, static_cast<int>(series.size()) - 1);
    coef.se = newey_west_se(series, lags);
    coef.t_stat = coef.se > 0.0 ? coef.mean / coef.se : 0.0;
    result.coefficients.push_back(std::move(coef));
  }
  return result;
}

// ----------------------------------------------------------------------------
// Student-t tail probability (via regularized incomplete beta)
// ----------------------------------------------------------------------------

namespace {

double beta_cf(double a, double b, double x) {
  const int max_iter = 300;
  const double eps = 1e-14, fpmin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::fabs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

double reg_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                    b * std::log(1.0 - x);
  double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

}  // namespace

double student_t_two_sided_p(double t, int df) {
  if (df < 1) throw std::invalid_argument("student_t_two_sided_p: df must be >= 1");
  double x = static_cast<double>(df) / (df + t * t);
  return reg_incomplete_beta(df / 2.0, 0.5, x);
}

}  // namespace ser
