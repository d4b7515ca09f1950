#include "doctest.h"
#include "ser/econometrics.hpp"
#include "ser/rng.hpp"

#include <cmath>
#include <numeric>

using namespace ser;

namespace {

Date day0() { return Date::from_ymd(2020, 1, 6); }

ReturnsPanel make_returns(const std::vector<Date>& dates,
                          const std::vector<std::vector<std::pair<int64_t, double>>>& rows) {
  ReturnsPanel panel;
  for (std::size_t i = 0; i < dates.size(); ++i)
    for (const auto& [stock, ret] : rows[i]) panel.add(dates[i], stock, ret);
  panel.finalize();
  return panel;
}

}  // namespace

TEST_CASE("quintile sort") {
  SUBCASE("five stocks, realized equals rank") {
    std::vector<int64_t> stocks = {1, 2, 3, 4, 5};
    std::vector<double> preds = {0.1, 0.2, 0.3, 0.4, 0.5};
    std::vector<double> realized = {0.01, 0.02, 0.03, 0.04, 0.05};
    QuintileAssignment q = quintile_sort(stocks, preds, realized);
    CHECK(q.long_short == doctest::Approx(0.04));
    CHECK(q.group == std::vector<int>{1, 2, 3, 4, 5});
  }

  SUBCASE("equal predictions break ties by stock id deterministically") {
    std::vector<int64_t> stocks = {5, 3, 1, 4, 2};
    std::vector<double> preds(5, 1.0);
    std::vector<double> realized = {0.05, 0.03, 0.01, 0.04, 0.02};
    QuintileAssignment q = quintile_sort(stocks, preds, realized);
    // Ranked by id: 1,2,3,4,5 -> groups follow ids.
    CHECK(q.group == std::vector<int>{5, 3, 1, 4, 2});
    CHECK(q.long_short == doctest::Approx(0.05 - 0.01));
  }

  SUBCASE("twelve stocks partition as 3,3,2,2,2 from the bottom") {
    std::vector<int64_t> stocks(12);
    std::iota(stocks.begin(), stocks.end(), 1);
    std::vector<double> preds;
    for (int i = 0; i < 12; ++i) preds.push_back(0.01 * (i + 1));
    // Hand-picked realized returns.
    std::vector<double> realized = {-0.02, -0.01, 0.00, 0.01, 0.02, 0.03,
                                    0.04,  0.05,  0.06, 0.07, 0.08, 0.09};
    QuintileAssignment q = quintile_sort(stocks, preds, realized);
    int counts[6] = {0, 0, 0, 0, 0, 0};
    for (int g : q.group) counts[g] += 1;
    CHECK(counts[1] == 3);
    CHECK(counts[2] == 3);
    CHECK(counts[3] == 2);
    CHECK(counts[4] == 2);
    CHECK(counts[5] == 2);
    // Bottom group = stocks 1..3, top group = stocks 11..12.
    double bottom = (-0.02 - 0.01 + 0.00) / 3.0;
    double top = (0.08 + 0.09) / 2.0;
    CHECK(q.long_short == doctest::Approx(top - bottom).epsilon(1e-15));
  }

  SUBCASE("every stock lands in exactly one group") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
      std::size_t n = 5 + rng.uniform_index(40);
      std::vector<int64_t> stocks(n);
      std::iota(stocks.begin(), stocks.end(), 1);
      std::vector<double> preds, realized;
      for (std::size_t i = 0; i < n; ++i) {
        preds.push_back(rng.normal());
        realized.push_back(rng.normal());
      }
      QuintileAssignment q = quintile_sort(stocks, preds, realized);
      std::size_t base = n / 5, extra = n % 5;
      int counts[6] = {0, 0, 0, 0, 0, 0};
      for (int g : q.group) {
        REQUIRE(g >= 1);
        REQUIRE(g <= 5);
        counts[g] += 1;
      }
      for (int g = 1; g <= 5; ++g)
        CHECK(static_cast<std::size_t>(counts[g]) ==
              base + (static_cast<std::size_t>(g - 1) < extra ? 1 : 0));
    }
  }

  SUBCASE("monotone transforms of the signal change nothing") {
    Rng rng(6);
    std::vector<int64_t> stocks(17);
    std::iota(stocks.begin(), stocks.end(), 1);
    std::vector<double> preds, realized;
    for (std::size_t i = 0; i < stocks.size(); ++i) {
      preds.push_back(rng.normal());
      realized.push_back(rng.normal());
    }
    QuintileAssignment base = quintile_sort(stocks, preds, realized);
    std::vector<double> exp_preds, affine;
    for (double p : preds) {
      exp_preds.push_back(std::exp(p));
      affine.push_back(3.0 * p + 11.0);
    }
    CHECK(quintile_sort(stocks, exp_preds, realized).group == base.group);
    CHECK(quintile_sort(stocks, exp_preds, realized).long_short == base.long_short);
    CHECK(quintile_sort(stocks, affine, realized).group == base.group);
  }

  SUBCASE("fewer than five names is an error") {
    std::vector<int64_t> stocks = {1, 2, 3, 4};
    std::vector<double> v = {1, 2, 3, 4};
    CHECK_THROWS_AS(quintile_sort(stocks, v, v), std::invalid_argument);
  }
}

TEST_CASE("performance statistics") {
  SUBCASE("constant daily return annualizes to mean times 252") {
    LongShortSeries series;
    series.periods_per_year = 252;
    for (int i = 0; i < 100; ++i) {
      series.dates.push_back(day0().plus_days(i));
      series.ret.push_back(0.0004);
    }
    PerfStats stats = performance(series);
    CHECK(stats.annualized_return == doctest::Approx(0.0004 * 252));
    CHECK(stats.annualized_return == doctest::Approx(0.1008));
    CHECK_FALSE(stats.sharpe_defined);  // zero variance
  }

  SUBCASE("zero-mean alternating series has zero AR and t") {
    LongShortSeries series;
    series.periods_per_year = 252;
    for (int i = 0; i < 50; ++i) {
      series.dates.push_back(day0().plus_days(i));
      series.ret.push_back(i % 2 == 0 ? 0.01 : -0.01);
    }
    PerfStats stats = performance(series);
    CHECK(stats.annualized_return == doctest::Approx(0.0));
    CHECK(stats.t_stat == doctest::Approx(0.0));
    CHECK(stats.sharpe_defined);
    CHECK(stats.sharpe == doctest::Approx(0.0));
  }

  SUBCASE("sample standard deviation uses T-1") {
    LongShortSeries series;
    series.periods_per_year = 252;
    series.dates = {day0(), day0().plus_days(1), day0().plus_days(2), day0().plus_days(3)};
    series.ret = {1.0, 2.0, 3.0, 4.0};
    PerfStats stats = performance(series);
    double sd = std::sqrt((2.25 + 0.25 + 0.25 + 2.25) / 3.0);
    CHECK(stats.t_stat == doctest::Approx(2.5 / (sd / 2.0)));
  }
}

TEST_CASE("factor alpha regression") {
  std::vector<Date> dates;
  for (int i = 0; i < 120; ++i) dates.push_back(day0().plus_days(i));

  SUBCASE("all-zero factors reduce to the mean") {
    LongShortSeries series;
    series.periods_per_year = 252;
    Rng rng(5);
    std::vector<FactorRow> factors;
    for (Date d : dates) {
      series.dates.push_back(d);
      series.ret.push_back(rng.normal(0.001, 0.01));
      factors.push_back({d, 0, 0, 0, 0, 0, 0});
    }
    // Zero factor columns are rank deficient; perturb minimally off zero.
    for (std::size_t i = 0; i < factors.size(); ++i) {
      factors[i].mktrf = 1e-8 * std::sin(static_cast<double>(i));
      factors[i].smb = 1e-8 * std::cos(static_cast<double>(i));
      factors[i].hml = 1e-8 * std::sin(2.0 * static_cast<double>(i));
      factors[i].rmw = 1e-8 * std::cos(3.0 * static_cast<double>(i));
      factors[i].cma = 1e-8 * std::sin(5.0 * static_cast<double>(i) + 1.0);
    }
    AlphaResult res = factor_alpha(series, factors);
    PerfStats perf = performance(series);
    CHECK(res.alpha_annualized == doctest::Approx(perf.annualized_return).epsilon(1e-4));
  }

  SUBCASE("series exactly half the market factor has zero alpha") {
    LongShortSeries series;
    series.periods_per_year = 252;
    Rng rng(6);
    std::vector<FactorRow> factors;
    for (Date d : dates) {
      FactorRow f{d,
                  rng.normal(0, 0.01),
                  rng.normal(0, 0.005),
                  rng.normal(0, 0.005),
                  rng.normal(0, 0.004),
                  rng.normal(0, 0.004),
                  0.0001};
      factors.push_back(f);
      series.dates.push_back(d);
      series.ret.push_back(0.5 * f.mktrf);
    }
    AlphaResult res = factor_alpha(series, factors);
    CHECK(res.alpha == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(res.loadings[0] == doctest::Approx(0.5).epsilon(1e-10));
  }

  SUBCASE("planted alpha is recovered within two robust standard errors") {
    LongShortSeries series;
    series.periods_per_year = 252;
    Rng rng(7);
    std::vector<FactorRow> factors;
    const double alpha_true = 0.0002;
    for (Date d : dates) {
      FactorRow f{d,
                  rng.normal(0, 0.01),
                  rng.normal(0, 0.005),
                  rng.normal(0, 0.005),
                  rng.normal(0, 0.004),
                  rng.normal(0, 0.004),
                  0.0};
      factors.push_back(f);
      series.dates.push_back(d);
      series.ret.push_back(alpha_true + 0.3 * f.mktrf + rng.normal(0, 0.001));
    }
    AlphaResult res = factor_alpha(series, factors);
    double se_annualized = res.t_stat != 0.0 ? res.alpha_annualized / res.t_stat : 1e9;
    CHECK(std::fabs(res.alpha_annualized - alpha_true * 252) <= 2.0 * std::fabs(se_annualized));
    CHECK(res.loadings[0] == doctest::Approx(0.3).epsilon(0.2));
  }
}

TEST_CASE("delayed series") {
  // Returns calendar: 40 days, 10 stocks; signal on every day.
  std::vector<Date> dates;
  for (int i = 0; i < 40; ++i) dates.push_back(day0().plus_days(i));

  SUBCASE("k=1 equals the unshifted long-short series exactly") {
    Rng rng(8);
    ReturnsPanel returns;
    SignalPanel signals;
    signals.periods_per_year = 252;
    for (std::size_t t = 0; t < dates.size(); ++t) {
      SignalCrossSection cs;
      cs.period = dates[t];
      for (int64_t s = 1; s <= 10; ++s) {
        returns.add(dates[t], s, rng.normal(0, 0.01));
        cs.stock.push_back(s);
        cs.signal.push_back(rng.normal());
      }
      signals.periods.push_back(std::move(cs));
    }
    returns.finalize();
    LongShortSeries a = long_short_series(signals, returns);
    LongShortSeries b = delayed_series(signals, returns, 1);
    CHECK(a.dates == b.dates);
    CHECK(a.ret == b.ret);
  }

  SUBCASE("a signal predicting two periods ahead peaks at k=3") {
    // Construct returns so that r_{t+3} = signal_t (in cross-section rank).
    ReturnsPanel returns;
    SignalPanel signals;
    signals.periods_per_year = 252;
    Rng rng(9);
    std::vector<std::vector<double>> sig(dates.size(), std::vector<double>(10));
    for (std::size_t t = 0; t < dates.size(); ++t)
      for (int s = 0; s < 10; ++s) sig[t][static_cast<std::size_t>(s)] = rng.normal();
    for (std::size_t t = 0; t < dates.size(); ++t) {
      for (int64_t s = 1; s <= 10; ++s) {
        double r = (t >= 3) ? 0.01 * sig[t - 3][static_cast<std::size_t>(s - 1)]
                            : rng.normal(0, 0.001);
        returns.add(dates[t], s, r);
      }
      SignalCrossSection cs;
      cs.period = dates[t];
      for (int64_t s = 1; s <= 10; ++s) {
        cs.stock.push_back(s);
        cs.signal.push_back(sig[t][static_cast<std::size_t>(s - 1)]);
      }
      signals.periods.push_back(std::move(cs));
    }
    returns.finalize();
    double mean_k1 = performance(delayed_series(signals, returns, 1)).mean;
    double mean_k3 = performance(delayed_series(signals, returns, 3)).mean;
    CHECK(mean_k3 > mean_k1);
    CHECK(mean_k3 > 0.01);  // top-bottom spread of a perfect rank signal
  }

  SUBCASE("white-noise returns stay statistically flat across delays") {
    ReturnsPanel returns;
    SignalPanel signals;
    signals.periods_per_year = 252;
    Rng rng(10);
    for (std::size_t t = 0; t < dates.size(); ++t) {
      SignalCrossSection cs;
      cs.period = dates[t];
      for (int64_t s = 1; s <= 12; ++s) {
        returns.add(dates[t], s, rng.normal(0, 0.01));
        cs.stock.push_back(s);
        cs.signal.push_back(rng.normal());
      }
      signals.periods.push_back(std::move(cs));
    }
    returns.finalize();
    for (int k = 1; k <= 4; ++k) {
      PerfStats stats = performance(delayed_series(signals, returns, k));
      CHECK(std::fabs(stats.t_stat) < 3.0);
    }
  }

  SUBCASE("k must be positive") {
    SignalPanel signals;
    ReturnsPanel returns;
    returns.finalize();
    CHECK_THROWS_AS(delayed_series(signals, returns, 0), std::invalid_argument);
  }
}

TEST_CASE("newey-west standard errors") {
  SUBCASE("constant series has zero standard error") {
    std::vector<double> series(30, 0.42);
    CHECK(newey_west_se(series, 3) == 0.0);
  }

  SUBCASE("lags=0 on 1..4 matches the hand covariance computation") {
    std::vector<double> series = {1, 2, 3, 4};
    // gamma_0 = mean((x - 2.5)^2) = 1.25; SE = sqrt(1.25 / 4).
    CHECK(newey_west_se(series, 0) == doctest::Approx(std::sqrt(1.25 / 4.0)).epsilon(1e-12));
    CHECK(newey_west_se(series, 0) == doctest::Approx(0.5590169944).epsilon(1e-9));
  }

  SUBCASE("lags=0 equals the plain 1/T-variance standard error") {
    Rng rng(11);
    for (int trial = 0; trial < 25; ++trial) {
      std::vector<double> series;
      int n = 10 + static_cast<int>(rng.uniform_index(50));
      for (int i = 0; i < n; ++i) series.push_back(rng.normal());
      double mean = std::accumulate(series.begin(), series.end(), 0.0) / n;
      double var = 0.0;
      for (double v : series) var += (v - mean) * (v - mean);
      var /= n;
      double plain = std::sqrt(var / n);
      CHECK(std::fabs(newey_west_se(series, 0) - plain) <= 1e-12 * std::max(1.0, plain));
    }
  }

  SUBCASE("T must exceed the lag count") {
    std::vector<double> series = {1, 2, 3};
    CHECK_THROWS_AS(newey_west_se(series, 3), std::invalid_argument);
    CHECK_THROWS_AS(newey_west_se(series, -1), std::invalid_argument);
  }
}

TEST_CASE("fama-macbeth") {
  SUBCASE("exact linear relation recovers the slope with zero error") {
    std::vector<FMCrossSection> sections;
    Rng rng(12);
    for (int t = 0; t < 12; ++t) {
      FMCrossSection cs;
      cs.period = day0().plus_days(t);
      cs.x.resize(1);
      for (int i = 0; i < 20; ++i) {
        double sig = rng.normal();
        cs.x[0].push_back(sig);
        cs.y.push_back(2.0 * sig);
      }
      sections.push_back(std::move(cs));
    }
    std::vector<std::string> names = {"signal"};
    FMResult res = fama_macbeth(sections, names, /*standardize=*/false, 3);
    CHECK(res.coefficients[1].mean == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(res.coefficients[1].se == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(res.coefficients[0].mean == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(res.avg_adj_r2 == doctest::Approx(1.0).epsilon(1e-10));
  }

  SUBCASE("single period reproduces plain OLS coefficients") {
    FMCrossSection cs;
    cs.period = day0();
    cs.x.resize(1);
    Rng rng(13);
    for (int i = 0; i < 30; ++i) {
      double sig = rng.normal();
      cs.x[0].push_back(sig);
      cs.y.push_back(0.5 + 1.5 * sig + rng.normal(0, 0.1));
    }
    std::vector<std::string> names = {"signal"};
    std::vector<FMCrossSection> sections = {cs};
    FMResult res = fama_macbeth(sections, names, false, 0);
    std::vector<double> beta = ols({cs.x[0]}, cs.y, true);
    CHECK(res.coefficients[0].mean == doctest::Approx(beta[0]).epsilon(1e-12));
    CHECK(res.coefficients[1].mean == doctest::Approx(beta[1]).epsilon(1e-12));
  }

  SUBCASE("pure-noise signal is insignificant for most seeds") {
    int significant = 0;
    for (uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(100 + seed);
      std::vector<FMCrossSection> sections;
      for (int t = 0; t < 60; ++t) {
        FMCrossSection cs;
        cs.period = day0().plus_days(t);
        cs.x.resize(1);
        for (int i = 0; i < 25; ++i) {
          cs.x[0].push_back(rng.normal());
          cs.y.push_back(rng.normal(0, 0.02));
        }
        sections.push_back(std::move(cs));
      }
      std::vector<std::string> names = {"signal"};
      FMResult res = fama_macbeth(sections, names, true, 5);
      if (std::fabs(res.coefficients[1].t_stat) > 2.0) ++significant;
    }
    CHECK(significant <= 3);  // ~5% size, generous bound over 20 seeds
  }

  SUBCASE("constant predictor drops the period with a warning") {
    std::vector<FMCrossSection> sections;
    for (int t = 0; t < 3; ++t) {
      FMCrossSection cs;
      cs.period = day0().plus_days(t);
      cs.x.resize(1);
      Rng rng(14 + static_cast<uint64_t>(t));
      for (int i = 0; i < 10; ++i) {
        cs.x[0].push_back(t == 1 ? 1.0 : rng.normal());  // period 1 constant
        cs.y.push_back(rng.normal());
      }
      sections.push_back(std::move(cs));
    }
    std::vector<std::string> names = {"signal"};
    FMResult res = fama_macbeth(sections, names, true, 0);
    CHECK(res.periods == 2);
    CHECK(res.warnings.size() == 1);
  }
}

TEST_CASE("student-t tail probabilities") {
  CHECK(student_t_two_sided_p(2.228, 10) == doctest::Approx(0.05).epsilon(2e-3));
  CHECK(student_t_two_sided_p(1.96, 1000) == doctest::Approx(0.05).epsilon(2e-2));
  CHECK(student_t_two_sided_p(0.0, 5) == doctest::Approx(1.0));
  CHECK(student_t_two_sided_p(-2.228, 10) == student_t_two_sided_p(2.228, 10));
  CHECK(student_t_two_sided_p(50.0, 10) < 1e-8);
}
