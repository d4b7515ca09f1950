#include "doctest.h"
#include "ser/attribution.hpp"
#include "ser/reference.hpp"
#include "ser/rng.hpp"

#include <algorithm>
#include <cmath>

using namespace ser;
using lin::Matrix;

namespace {

ModelConfig tiny_cfg(int m, int h, int l, int p, int s, int n_max) {
  ModelConfig cfg;
  cfg.embed_dim = m;
  cfg.heads = h;
  cfg.daily_layers = l;
  cfg.weekly_layers = p;
  cfg.mlp_layers = s;
  cfg.max_events = n_max;
  cfg.days_per_week = 1;
  return cfg;
}

FirmPeriodObservation daily_obs(std::vector<CanonicalEvent> events, int n_max) {
  return build_observation(7, Date::from_ymd(2020, 1, 6), events, 0.0, n_max);
}

ImportanceRecord make_rec(FeatureKey key, double score) {
  return ImportanceRecord{key, 1, Date::from_ymd(2020, 1, 6), score};
}

FeatureKey event_key(int32_t a, int32_t b, int32_t c) {
  return FeatureKey{FeatureKey::Kind::event, a, b, c};
}

}  // namespace

TEST_CASE("zero embedding vector scores zero") {
  ModelConfig cfg = tiny_cfg(4, 1, 1, 1, 2, 2);
  ModelParams params = init_params(cfg, 6, 4, 3, 2);
  // Event 2-2-3 composed of rows forced to cancel: subject == object, action 0.
  for (int j = 0; j < 4; ++j) {
    params.entity_table.at(3, j) = params.entity_table.at(2, j);
    params.action_table.at(2, j) = 0.0;
  }
  auto records =
      local_importance(cfg, params, daily_obs({{2, 2, 3}}, 2), 1, FeatureLevel::event);
  REQUIRE(records.size() == 1);
  CHECK(records[0].score == 0.0);
}

TEST_CASE("linear pass-through satisfies the Euler identity") {
  // L = P = 0 and a single bias-free linear layer: the map from inputs to the
  // output is linear, so sum over x_i * df/dx_i equals the prediction.
  ModelConfig cfg = tiny_cfg(6, 1, 0, 0, 1, 3);
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    ModelParams params = init_params(cfg, 8, 5, 4, 100 + trial);
    for (double& v : params.mlp_b[0].data) v = 0.0;  // zero bias
    FirmPeriodObservation obs = daily_obs({{2, 2, 3}, {4, 3, 5}}, 3);
    int32_t stock = static_cast<int32_t>(1 + rng.uniform_index(3));

    double pred = predict(cfg, params, obs, stock);
    auto records =
        local_importance(cfg, params, obs, stock, FeatureLevel::event, /*include_aux=*/true);
    double total = 0.0;
    for (const ImportanceRecord& r : records) total += r.score;
    CHECK(total == doctest::Approx(pred).epsilon(1e-12));
  }
}

TEST_CASE("event scores match the finite-difference oracle") {
  ModelConfig cfg = tiny_cfg(6, 2, 1, 1, 2, 3);
  ModelParams params = init_params(cfg, 9, 5, 4, 33);
  FirmPeriodObservation obs = daily_obs({{2, 2, 3}, {4, 3, 5}, {6, 4, 7}}, 3);
  const int32_t stock = 1;

  auto records = local_importance(cfg, params, obs, stock, FeatureLevel::event);
  REQUIRE(records.size() == 3);

  // FD through the independent reference forward, perturbing the subject row
  // (z is linear in it, so df/dz equals df/dsubject).
  ref::Inputs inputs = ref::materialize(cfg, params, obs, stock);
  const double eps = 1e-6;
  for (std::size_t e = 0; e < 3; ++e) {
    double score_fd = 0.0;
    for (int d = 0; d < cfg.embed_dim; ++d) {
      double z_d = inputs.days[0].subj[e][static_cast<std::size_t>(d)] +
                   inputs.days[0].act[e][static_cast<std::size_t>(d)] -
                   inputs.days[0].obj[e][static_cast<std::size_t>(d)];
      double orig = inputs.days[0].subj[e][static_cast<std::size_t>(d)];
      inputs.days[0].subj[e][static_cast<std::size_t>(d)] = orig + eps;
      double up = ref::forward(cfg, params, inputs);
      inputs.days[0].subj[e][static_cast<std::size_t>(d)] = orig - eps;
      double dn = ref::forward(cfg, params, inputs);
      inputs.days[0].subj[e][static_cast<std::size_t>(d)] = orig;
      score_fd += z_d * (up - dn) / (2 * eps);
    }
    // Records and materialized inputs share the canonical event order.
    double denom = std::max({std::fabs(score_fd), std::fabs(records[e].score), 1e-8});
    CHECK(std::fabs(score_fd - records[e].score) / denom < 1e-4);
  }
}

TEST_CASE("entity scores match finite differences at the lookup level") {
  ModelConfig cfg = tiny_cfg(6, 2, 1, 1, 2, 2);
  ModelParams params = init_params(cfg, 9, 5, 4, 44);
  FirmPeriodObservation obs = daily_obs({{2, 2, 3}, {4, 3, 5}}, 2);
  const int32_t stock = 2;

  auto records = local_importance(cfg, params, obs, stock, FeatureLevel::entity);
  REQUIRE(records.size() == 4);  // subject + object per event

  ref::Inputs inputs = ref::materialize(cfg, params, obs, stock);
  const double eps = 1e-6;
  for (std::size_t e = 0; e < 2; ++e) {
    for (bool subject : {true, false}) {
      auto& row = subject ? inputs.days[0].subj[e] : inputs.days[0].obj[e];
      double score_fd = 0.0;
      for (int d = 0; d < cfg.embed_dim; ++d) {
        double orig = row[static_cast<std::size_t>(d)];
        row[static_cast<std::size_t>(d)] = orig + eps;
        double up = ref::forward(cfg, params, inputs);
        row[static_cast<std::size_t>(d)] = orig - eps;
        double dn = ref::forward(cfg, params, inputs);
        row[static_cast<std::size_t>(d)] = orig;
        score_fd += orig * (up - dn) / (2 * eps);
      }
      std::size_t rec_idx = e * 2 + (subject ? 0 : 1);
      double denom = std::max({std::fabs(score_fd), std::fabs(records[rec_idx].score), 1e-8});
      CHECK(std::fabs(score_fd - records[rec_idx].score) / denom < 1e-4);
    }
  }
}

TEST_CASE("aggregate polarity arithmetic") {
  FeatureKey key = event_key(2, 2, 3);

  SUBCASE("+2/-2 splits evenly") {
    std::vector<ImportanceRecord> recs = {make_rec(key, 2.0), make_rec(key, -2.0)};
    auto aggs = aggregate(recs, 1);
    REQUIRE(aggs.size() == 1);
    CHECK(aggs[0].abs_importance == doctest::Approx(2.0));
    CHECK(aggs[0].pos_pct == doctest::Approx(0.5));
    CHECK(aggs[0].neg_pct == doctest::Approx(0.5));
    CHECK(aggs[0].freq == 2);
  }

  SUBCASE("all-positive scores give 100 percent positive share") {
    std::vector<ImportanceRecord> recs = {make_rec(key, 0.011), make_rec(key, 0.0102),
                                          make_rec(key, 0.009)};
    auto aggs = aggregate(recs, 1);
    CHECK(aggs[0].pos_pct == doctest::Approx(1.0));
    CHECK(aggs[0].neg_pct == doctest::Approx(0.0));
  }

  SUBCASE("hand mass computation for mixed signs") {
    std::vector<ImportanceRecord> recs = {make_rec(key, 3.0), make_rec(key, -1.0),
                                          make_rec(key, -2.0)};
    auto aggs = aggregate(recs, 1);
    CHECK(aggs[0].abs_importance == doctest::Approx(2.0));  // (3+1+2)/3
    CHECK(aggs[0].pos_pct == doctest::Approx(0.5));
    CHECK(aggs[0].neg_pct == doctest::Approx(0.5));
  }

  SUBCASE("record order does not matter and shares always sum to one") {
    Rng rng(3);
    std::vector<ImportanceRecord> recs;
    for (int i = 0; i < 60; ++i)
      recs.push_back(make_rec(event_key(static_cast<int32_t>(2 + rng.uniform_index(4)), 2, 3),
                              rng.normal()));
    auto a = aggregate(recs, 1);
    std::vector<ImportanceRecord> shuffled = recs;
    for (std::size_t i = shuffled.size(); i > 1; --i)
      std::swap(shuffled[i - 1], shuffled[rng.uniform_index(i)]);
    auto b = aggregate(shuffled, 1);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].feature == b[i].feature);
      CHECK(a[i].abs_importance == doctest::Approx(b[i].abs_importance).epsilon(1e-12));
      CHECK(a[i].pos_pct + a[i].neg_pct == doctest::Approx(1.0).epsilon(1e-9));
    }
  }

  SUBCASE("min_freq filters sparse features and sum flag switches the statistic") {
    std::vector<ImportanceRecord> recs = {make_rec(event_key(2, 2, 3), 1.0),
                                          make_rec(event_key(2, 2, 3), 3.0),
                                          make_rec(event_key(9, 2, 3), 5.0)};
    auto aggs = aggregate(recs, 2);
    REQUIRE(aggs.size() == 1);
    CHECK(aggs[0].feature.a == 2);
    auto sums = aggregate(recs, 2, /*sum_scores=*/true);
    CHECK(sums[0].abs_importance == doctest::Approx(4.0));
  }
}

TEST_CASE("polarity tables") {
  FeatureKey pos_key{FeatureKey::Kind::entity_subject, 2, 0, 0};
  FeatureKey mixed_key{FeatureKey::Kind::entity_subject, 3, 0, 0};
  FeatureKey neg_key{FeatureKey::Kind::entity_subject, 4, 0, 0};

  std::vector<ImportanceRecord> recs = {
      make_rec(pos_key, 1.0),  make_rec(pos_key, 2.0),   // strictly positive
      make_rec(mixed_key, 1.5), make_rec(mixed_key, -1.5),  // symmetric, mean zero
      make_rec(neg_key, -0.5), make_rec(neg_key, -1.0)};
  auto aggs = aggregate(recs, 1);
  PolarityTables tables = polarity_tables(aggs, 10);

  REQUIRE(tables.positive.size() == 1);
  CHECK(tables.positive[0].feature == pos_key);
  REQUIRE(tables.negative.size() == 1);
  CHECK(tables.negative[0].feature == neg_key);

  // Ordering matches a brute-force sort on signed means.
  Rng rng(5);
  std::vector<ImportanceRecord> many;
  for (int f = 0; f < 10; ++f)
    for (int k = 0; k < 4; ++k)
      many.push_back(make_rec(FeatureKey{FeatureKey::Kind::entity_subject,
                                         static_cast<int32_t>(2 + f), 0, 0},
                              rng.normal()));
  auto aggs2 = aggregate(many, 1);
  PolarityTables t2 = polarity_tables(aggs2, 3);
  std::vector<AggregateImportance> brute(aggs2.begin(), aggs2.end());
  std::sort(brute.begin(), brute.end(),
            [](const auto& x, const auto& y) { return x.signed_mean > y.signed_mean; });
  std::vector<AggregateImportance> brute_pos;
  for (const auto& a : brute)
    if (a.signed_mean > 0 && brute_pos.size() < 3) brute_pos.push_back(a);
  REQUIRE(t2.positive.size() == brute_pos.size());
  for (std::size_t i = 0; i < brute_pos.size(); ++i)
    CHECK(t2.positive[i].feature == brute_pos[i].feature);
}

TEST_CASE("padded slots emit no records") {
  ModelConfig cfg = tiny_cfg(4, 1, 1, 1, 2, 6);
  ModelParams params = init_params(cfg, 8, 5, 4, 3);
  FirmPeriodObservation obs = daily_obs({{2, 2, 3}, {4, 3, 5}}, 6);  // 4 PAD slots
  auto event_recs = local_importance(cfg, params, obs, 1, FeatureLevel::event);
  CHECK(event_recs.size() == 2);
  auto entity_recs = local_importance(cfg, params, obs, 1, FeatureLevel::entity);
  CHECK(entity_recs.size() == 4);
  for (const auto& r : entity_recs) CHECK(r.feature.a != Vocabulary::kPad);
}

TEST_CASE("panel attribution is deterministic across parallel and serial runs") {
  ModelConfig cfg = tiny_cfg(4, 2, 1, 1, 2, 3);
  ModelParams params = init_params(cfg, 10, 6, 5, 8);
  Panel panel;
  panel.mode = PanelMode::daily;
  Rng rng(10);
  std::vector<int32_t> stock_indices;
  for (int i = 0; i < 12; ++i) {
    std::vector<CanonicalEvent> events;
    int n = 1 + static_cast<int>(rng.uniform_index(3));
    for (int e = 0; e < n; ++e)
      events.push_back({static_cast<int32_t>(2 + rng.uniform_index(8)),
                        static_cast<int32_t>(2 + rng.uniform_index(4)),
                        static_cast<int32_t>(2 + rng.uniform_index(8))});
    panel.observations.push_back(build_observation(
        i + 1, Date::from_ymd(2020, 1, 6).plus_days(i / 4), events, 0.0, 3));
  }
  panel.finalize();
  for (const auto& obs : panel.observations)
    stock_indices.push_back(static_cast<int32_t>(1 + obs.stock_id % 4));

  auto par = attribute_panel(cfg, params, panel, stock_indices, FeatureLevel::event, true);
  auto ser_recs = attribute_panel(cfg, params, panel, stock_indices, FeatureLevel::event, false);
  REQUIRE(par.size() == ser_recs.size());
  for (std::size_t i = 0; i < par.size(); ++i) {
    CHECK(par[i].feature == ser_recs[i].feature);
    CHECK(par[i].score == ser_recs[i].score);
  }
}
