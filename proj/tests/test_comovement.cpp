#include "doctest.h"
#include "ser/comovement.hpp"
#include "ser/rng.hpp"

#include <cmath>
#include <numeric>

using namespace ser;

namespace {

FirmPeriodObservation obs_with_events(int64_t stock, Date day,
                                      std::vector<CanonicalEvent> events, int n_max = 8) {
  return build_observation(stock, day, events, 0.0, n_max);
}

}  // namespace

TEST_CASE("tf-idf exposure") {
  // 9 firm-day observations. Entity 5: firm 1 mentions it 3 times (TF=3),
  // firms 2..4 once each -> DF = 4, N_docs = 9.
  Panel panel;
  panel.mode = PanelMode::daily;
  Date d = Date::from_ymd(2020, 3, 2);
  int32_t e = 5;
  panel.observations.push_back(
      obs_with_events(1, d, {{e, 2, 10}, {e, 3, 11}, {e, 4, 12}}));
  panel.observations.push_back(obs_with_events(2, d, {{e, 2, 13}}));
  panel.observations.push_back(obs_with_events(3, d, {{e, 2, 14}}));
  panel.observations.push_back(obs_with_events(4, d, {{e, 2, 15}}));
  for (int64_t firm = 5; firm <= 9; ++firm)
    panel.observations.push_back(obs_with_events(firm, d, {{20, 2, 21}}));
  panel.finalize();

  ExposureMatrix exp_matrix = exposure(panel);
  CHECK(exp_matrix.n_docs == 9);
  double expected = 3.0 * std::log(10.0 / 5.0);
  CHECK(exp_matrix.by_entity.at(e).at(1) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(exp_matrix.by_entity.at(e).at(1) == doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-12));

  // Entity 20 appears in 5 of . . . firms 5..9: check monotonicity in TF.
  CHECK(exp_matrix.by_entity.at(e).at(2) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  SUBCASE("entity present in every document has zero exposure") {
    Panel all;
    all.mode = PanelMode::daily;
    for (int64_t firm = 1; firm <= 4; ++firm)
      all.observations.push_back(obs_with_events(firm, d, {{7, 2, static_cast<int32_t>(10 + firm)}}));
    all.finalize();
    ExposureMatrix m = exposure(all);
    // DF_e = N_docs = 4 -> log(5/5) = 0.
    CHECK(m.by_entity.at(7).at(1) == doctest::Approx(0.0));
  }

  SUBCASE("absent entity has no exposure entry") {
    CHECK(exp_matrix.by_entity.find(999) == exp_matrix.by_entity.end());
  }
}

TEST_CASE("top-k portfolio") {
  ExposureMatrix m;
  m.n_docs = 10;

  SUBCASE("k larger than the universe returns everyone with a warning") {
    m.by_entity[5] = {{1, 2.0}, {2, 1.0}};
    std::vector<std::string> warnings;
    auto firms = top_k_portfolio(5, m, 15, &warnings);
    CHECK(firms == std::vector<int64_t>{1, 2});
    CHECK(warnings.size() == 1);
  }

  SUBCASE("strictly decreasing exposures give the first k firms") {
    for (int64_t f = 1; f <= 10; ++f) m.by_entity[6][f] = 10.0 - static_cast<double>(f);
    auto firms = top_k_portfolio(6, m, 3);
    CHECK(firms == std::vector<int64_t>{1, 2, 3});
  }

  SUBCASE("ties resolve by ascending firm id") {
    m.by_entity[7] = {{9, 1.0}, {3, 1.0}, {5, 1.0}, {1, 2.0}};
    auto firms = top_k_portfolio(7, m, 3);
    CHECK(firms == std::vector<int64_t>{1, 3, 5});
  }

  SUBCASE("zero exposures are not selectable") {
    m.by_entity[8] = {{1, 0.0}, {2, 1.0}};
    std::vector<std::string> warnings;
    auto firms = top_k_portfolio(8, m, 2, &warnings);
    CHECK(firms == std::vector<int64_t>{2});
    CHECK(warnings.size() == 1);
  }
}

TEST_CASE("shock detection") {
  // Trading calendar over four weeks.
  std::vector<Date> days = make_weekday_calendar(Date::from_ymd(2020, 3, 2), 20);
  TradingCalendar calendar(days);
  const int32_t focal = 5;
  std::vector<int64_t> portfolio = {1, 2, 3, 4};

  auto hit_obs = [&](int64_t firm, Date day) {
    return obs_with_events(firm, day, {{focal, 2, 10}});
  };
  auto miss_obs = [&](int64_t firm, Date day) {
    return obs_with_events(firm, day, {{30, 2, 10}});
  };

  SUBCASE("three portfolio firms on one news day create a next-day shock") {
    Panel panel;
    panel.mode = PanelMode::daily;
    Date news = days[2];
    panel.observations.push_back(hit_obs(1, news));
    panel.observations.push_back(hit_obs(2, news));
    panel.observations.push_back(hit_obs(3, news));
    panel.finalize();
    ShockConfig cfg;
    cfg.min_shocks = 1;
    auto shocks = detect_shocks(focal, portfolio, panel, calendar, cfg);
    REQUIRE(shocks.has_value());
    REQUIRE(shocks->shock_days.size() == 1);
    CHECK(shocks->shock_days[0] == days[3]);
  }

  SUBCASE("two firms are below the threshold") {
    Panel panel;
    panel.mode = PanelMode::daily;
    panel.observations.push_back(hit_obs(1, days[2]));
    panel.observations.push_back(hit_obs(2, days[2]));
    panel.observations.push_back(miss_obs(3, days[2]));
    panel.finalize();
    ShockConfig cfg;
    cfg.min_shocks = 1;
    CHECK_FALSE(detect_shocks(focal, portfolio, panel, calendar, cfg).has_value());
  }

  SUBCASE("friday news shocks on monday") {
    Panel panel;
    panel.mode = PanelMode::daily;
    Date friday = Date::from_ymd(2020, 3, 6);
    REQUIRE(friday.weekday() == 5);
    panel.observations.push_back(hit_obs(1, friday));
    panel.observations.push_back(hit_obs(2, friday));
    panel.observations.push_back(hit_obs(3, friday));
    panel.finalize();
    ShockConfig cfg;
    cfg.min_shocks = 1;
    auto shocks = detect_shocks(focal, portfolio, panel, calendar, cfg);
    REQUIRE(shocks.has_value());
    CHECK(shocks->shock_days[0] == Date::from_ymd(2020, 3, 9));
  }

  SUBCASE("entities with fewer than min_shocks days are dropped") {
    Panel panel;
    panel.mode = PanelMode::daily;
    for (int w = 0; w < 3; ++w) {
      Date news = days[static_cast<std::size_t>(w * 5)];
      panel.observations.push_back(hit_obs(1, news));
      panel.observations.push_back(hit_obs(2, news));
      panel.observations.push_back(hit_obs(3, news));
    }
    panel.finalize();
    ShockConfig cfg;  // default min_shocks = 5
    CHECK_FALSE(detect_shocks(focal, portfolio, panel, calendar, cfg).has_value());
    cfg.min_shocks = 3;
    auto shocks = detect_shocks(focal, portfolio, panel, calendar, cfg);
    REQUIRE(shocks.has_value());
    CHECK(shocks->shock_days.size() == 3);
  }

  SUBCASE("alias tokens count toward the focal entity") {
    Panel panel;
    panel.mode = PanelMode::daily;
    panel.observations.push_back(hit_obs(1, days[2]));
    panel.observations.push_back(obs_with_events(2, days[2], {{40, 2, 10}}));  // alias
    panel.observations.push_back(obs_with_events(3, days[2], {{10, 2, 40}}));  // alias object
    panel.finalize();
    ShockConfig cfg;
    cfg.min_shocks = 1;
    cfg.aliases = {40};
    CHECK(detect_shocks(focal, portfolio, panel, calendar, cfg).has_value());
  }
}

TEST_CASE("mean pairwise correlation") {
  SUBCASE("symmetric in firm order and invariant to positive affine rescale") {
    Rng rng(4);
    std::vector<std::vector<double>> window(12, std::vector<double>(4));
    for (auto& row : window)
      for (double& v : row) v = rng.normal(0, 0.01);

    double base = mean_pairwise_correlation(window);

    std::vector<std::vector<double>> swapped = window;
    for (auto& row : swapped) std::swap(row[0], row[3]);
    CHECK(mean_pairwise_correlation(swapped) == doctest::Approx(base).epsilon(1e-12));

    std::vector<std::vector<double>> scaled = window;
    for (auto& row : scaled) {
      row[1] = 3.0 * row[1] + 0.5;
      row[2] = 0.25 * row[2] - 1.0;
    }
    CHECK(mean_pairwise_correlation(scaled) == doctest::Approx(base).epsilon(1e-10));
  }

  SUBCASE("zero-variance firm is skipped and counted") {
    std::vector<std::vector<double>> window(5, std::vector<double>(3));
    Rng rng(5);
    for (auto& row : window) {
      row[0] = rng.normal();
      row[1] = rng.normal();
      row[2] = 1.0;  // constant
    }
    int skipped = 0;
    double value = mean_pairwise_correlation(window, &skipped);
    CHECK(skipped == 2);  // both pairs touching the constant firm
    CHECK(std::isfinite(value));
  }

  SUBCASE("identical window difference is exactly zero") {
    Rng rng(6);
    std::vector<std::vector<double>> window(9, std::vector<double>(5));
    for (auto& row : window)
      for (double& v : row) v = rng.normal();
    CHECK(mean_pairwise_correlation(window) - mean_pairwise_correlation(window) == 0.0);
  }
}

namespace {

// Returns panel where shocks drive a common factor inside the event window
// and returns are independent elsewhere.
struct ComoveFixture {
  ReturnsPanel returns;
  ShockCalendar shocks;
  std::vector<int64_t> portfolio;
};

ComoveFixture common_factor_fixture(uint64_t seed, int n_firms, int n_shocks, int tau,
                                    double factor_sd, double idio_sd) {
  ComoveFixture fix;
  std::vector<Date> days = make_weekday_calendar(Date::from_ymd(2018, 1, 1), 80 * n_shocks + 80);
  Rng rng(seed);
  for (int f = 0; f < n_firms; ++f) fix.portfolio.push_back(100 + f);

  std::vector<int> shock_idx;
  for (int s = 0; s < n_shocks; ++s) shock_idx.push_back(40 + 80 * s);
  fix.shocks.entity = 1;
  for (int idx : shock_idx) fix.shocks.shock_days.push_back(days[static_cast<std::size_t>(idx)]);

  for (std::size_t t = 0; t < days.size(); ++t) {
    bool in_event = false;
    for (int idx : shock_idx)
      if (static_cast<int>(t) >= idx - tau && static_cast<int>(t) <= idx + tau) in_event = true;
    double factor = in_event ? rng.normal(0.0, factor_sd) : 0.0;
    for (int64_t firm : fix.portfolio)
      fix.returns.add(days[t], firm, factor + rng.normal(0.0, idio_sd));
  }
  fix.returns.finalize();
  return fix;
}

}  // namespace

TEST_CASE("delta rho on the constructed fixture") {
  const int tau = 3;
  // Event window: returns = factor + small idiosyncratic noise, pairwise
  // correlation target = sf^2 / (sf^2 + si^2); baseline is independent noise.
  const double sf = 0.02, si = 0.004;
  double target = sf * sf / (sf * sf + si * si);

  ComoveFixture fix = common_factor_fixture(3, 8, 12, tau, sf, si);
  ComoveResult res = delta_rho(fix.returns, fix.portfolio, fix.shocks, tau);

  CHECK(res.shocks_used == 12);
  CHECK(std::fabs(res.delta_rho - target) < 0.05);
  CHECK(res.rho_event > 0.8);
  CHECK(std::fabs(res.rho_base) < 0.15);
  CHECK(res.p_value < 0.01);

  SUBCASE("tau bounds") {
    CHECK_THROWS_AS(delta_rho(fix.returns, fix.portfolio, fix.shocks, 7), std::invalid_argument);
    CHECK_THROWS_AS(delta_rho(fix.returns, fix.portfolio, fix.shocks, -1), std::invalid_argument);
    for (int t = 0; t <= 6; ++t) CHECK_NOTHROW(delta_rho(fix.returns, fix.portfolio, fix.shocks, t));
  }
}

TEST_CASE("leave-one-out contributions") {
  SUBCASE("hand-computed three-shock case") {
    ComoveResult res;
    res.shocks_used = 3;
    res.per_shock_event_rho = {0.6, 0.3, 0.9};
    res.per_shock_delta = {0.5, 0.1, 0.3};
    res.rho_event = (0.6 + 0.3 + 0.9) / 3.0;
    res.delta_rho = (0.5 + 0.1 + 0.3) / 3.0;
    res.shock_dates = {Date::from_ymd(2020, 1, 6), Date::from_ymd(2020, 2, 6),
                       Date::from_ymd(2020, 3, 6)};
    auto rows = leave_one_out(res);
    REQUIRE(rows.size() == 3);
    // Dropping shock 0: post mean (0.3+0.9)/2 = 0.6 -> same as full ->
    // drop pct = (0.6 - 0.6)/0.6 * 100 = 0.
    CHECK(rows[0].post_corr_drop_pct == doctest::Approx(0.0).epsilon(1e-10));
    // Dropping shock 1: reduced post = 0.75, full = 0.6 -> -25%.
    CHECK(rows[1].post_corr_drop_pct == doctest::Approx(-25.0).epsilon(1e-10));
    // Dropping shock 0 for deltas: reduced = 0.2, full = 0.3 -> +33.33%.
    CHECK(rows[0].delta_drop_pct == doctest::Approx(100.0 / 3.0).epsilon(1e-10));
  }

  SUBCASE("identical shocks contribute identically") {
    ComoveResult res;
    res.shocks_used = 4;
    res.per_shock_event_rho = {0.5, 0.5, 0.5, 0.5};
    res.per_shock_delta = {0.2, 0.2, 0.2, 0.2};
    res.rho_event = 0.5;
    res.delta_rho = 0.2;
    res.shock_dates.assign(4, Date::from_ymd(2020, 1, 6));
    auto rows = leave_one_out(res);
    for (const auto& row : rows) {
      CHECK(row.post_corr_drop_pct == doctest::Approx(0.0));
      CHECK(row.delta_drop_pct == doctest::Approx(0.0));
    }
  }

  SUBCASE("the dominant shock has the largest drop") {
    ComoveResult res;
    res.shocks_used = 3;
    res.per_shock_event_rho = {0.9, 0.2, 0.1};
    res.per_shock_delta = {0.8, 0.1, 0.05};
    res.rho_event = (0.9 + 0.2 + 0.1) / 3;
    res.delta_rho = (0.8 + 0.1 + 0.05) / 3;
    res.shock_dates.assign(3, Date::from_ymd(2020, 1, 6));
    auto rows = leave_one_out(res);
    CHECK(rows[0].post_corr_drop_pct > rows[1].post_corr_drop_pct);
    CHECK(rows[0].post_corr_drop_pct > rows[2].post_corr_drop_pct);
    CHECK(rows[0].delta_drop_pct > rows[1].delta_drop_pct);
  }

  SUBCASE("a single shock is undefined") {
    ComoveResult res;
    res.shocks_used = 1;
    res.per_shock_event_rho = {0.5};
    res.per_shock_delta = {0.1};
    res.shock_dates = {Date::from_ymd(2020, 1, 6)};
    CHECK_THROWS_AS(leave_one_out(res), std::invalid_argument);
  }
}

TEST_CASE("entity grouping") {
  SUBCASE("84 entities split 28/28/28 under the equal scheme") {
    std::vector<double> scores;
    Rng rng(7);
    for (int i = 0; i < 84; ++i) scores.push_back(rng.uniform(0.0004, 0.0021));
    auto labels = group_entities(scores, GroupScheme::equal);
    int counts[3] = {0, 0, 0};
    for (int g : labels) counts[g] += 1;
    CHECK(counts[0] == 28);
    CHECK(counts[1] == 28);
    CHECK(counts[2] == 28);
    // High group holds the largest scores.
    double min_high = 1e9, max_mid = -1e9;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (labels[i] == 0) min_high = std::min(min_high, scores[i]);
      if (labels[i] == 1) max_mid = std::max(max_mid, scores[i]);
    }
    CHECK(min_high >= max_mid);
  }

  SUBCASE("uneven counts put the extras in the earlier groups") {
    std::vector<double> scores(10, 0.0);
    std::iota(scores.begin(), scores.end(), 0.0);
    auto labels = group_entities(scores, GroupScheme::equal);
    int counts[3] = {0, 0, 0};
    for (int g : labels) counts[g] += 1;
    CHECK(counts[0] == 4);
    CHECK(counts[1] == 3);
    CHECK(counts[2] == 3);
  }

  SUBCASE("value thresholds follow the closed lower bound") {
    std::vector<double> scores = {0.0015, 0.0012, 0.0010, 0.0009, 0.0021};
    auto labels = group_entities(scores, GroupScheme::value);
    CHECK(labels[0] == 0);  // exactly 0.0015 is High
    CHECK(labels[1] == 1);  // 0.0012 is Mid
    CHECK(labels[2] == 1);  // exactly 0.0010 is Mid
    CHECK(labels[3] == 2);
    CHECK(labels[4] == 0);
  }
}
