#include "ser/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace ser {

std::string FeatureKey::label(const VocabBundle& vocab) const {
  switch (kind) {
    case Kind::event:
      return vocab.entities.key(a) + "-" + vocab.actions.key(b) + "-" + vocab.entities.key(c);
    case Kind::entity_subject:
    case Kind::entity_object:
      return vocab.entities.key(a);
    case Kind::cls_token:
      return "<cls>";
    case Kind::stock_token:
      return "<stock>";
  }
  return "<?>";
}

namespace {

double row_dot(const lin::Matrix& value, const lin::Matrix& grad, int row) {
  double acc = 0.0;
  for (int j = 0; j < value.cols; ++j) acc += value.at(row, j) * grad.at(row, j);
  return acc;
}

double full_dot(const lin::Matrix& value, const lin::Matrix& grad) {
  double acc = 0.0;
  for (std::size_t i = 0; i < value.data.size(); ++i) acc += value.data[i] * grad.data[i];
  return acc;
}

}  // namespace

std::vector<ImportanceRecord> local_importance(const ModelConfig& cfg, const ModelParams& params,
                                               const FirmPeriodObservation& obs,
                                               int32_t stock_index, FeatureLevel level,
                                               bool include_aux) {
  ad::Tape tape;
  ParamVars vars = add_params(tape, params);
  ForwardHandles handles;
  ad::Var pred = build_forward(tape, cfg, vars, obs, stock_index, &handles);
  tape.backward(pred);

  std::vector<ImportanceRecord> records;
  for (std::size_t d = 0; d < handles.live.size(); ++d) {
    const auto& live = handles.live[d];
    if (level == FeatureLevel::event) {
      const lin::Matrix& value = tape.value(handles.day_events[d]);
      const lin::Matrix& grad = tape.grad(handles.day_events[d]);
      for (std::size_t i = 0; i < live.size(); ++i) {
        ImportanceRecord rec;
        rec.feature = {FeatureKey::Kind::event, live[i].subject_token, live[i].action_token,
                       live[i].object_token};
        rec.stock_id = obs.stock_id;
        rec.period = obs.period;
        rec.score = row_dot(value, grad, static_cast<int>(i));
        records.push_back(rec);
      }
    } else {
      const lin::Matrix& sv = tape.value(handles.day_subj[d]);
      const lin::Matrix& sg = tape.grad(handles.day_subj[d]);
      const lin::Matrix& ov = tape.value(handles.day_obj[d]);
      const lin::Matrix& og = tape.grad(handles.day_obj[d]);
      for (std::size_t i = 0; i < live.size(); ++i) {
        ImportanceRecord subj{{FeatureKey::Kind::entity_subject, live[i].subject_token, 0, 0},
                              obs.stock_id,
                              obs.period,
                              row_dot(sv, sg, static_cast<int>(i))};
        ImportanceRecord obj{{FeatureKey::Kind::entity_object, live[i].object_token, 0, 0},
                             obs.stock_id,
                             obs.period,
                             row_dot(ov, og, static_cast<int>(i))};
        records.push_back(subj);
        records.push_back(obj);
      }
    }
  }

  if (include_aux) {
    ImportanceRecord cls{{FeatureKey::Kind::cls_token, 0, 0, 0},
                         obs.stock_id,
                         obs.period,
                         full_dot(tape.value(vars.cls_daily), tape.grad(vars.cls_daily))};
    records.push_back(cls);
    if (cfg.mode == PanelMode::weekly) {
      ImportanceRecord wcls{{FeatureKey::Kind::cls_token, 1, 0, 0},
                            obs.stock_id,
                            obs.period,
                            full_dot(tape.value(vars.cls_weekly), tape.grad(vars.cls_weekly))};
      records.push_back(wcls);
    }
    // The stock row is looked up from the table; its table-row gradient is the
    // total over all uses within this observation.
    double s = 0.0;
    const lin::Matrix& tv = tape.value(vars.stock_table);
    const lin::Matrix& tg = tape.grad(vars.stock_table);
    for (int j = 0; j < tv.cols; ++j) s += tv.at(stock_index, j) * tg.at(stock_index, j);
    records.push_back(
        ImportanceRecord{{FeatureKey::Kind::stock_token, stock_index, 0, 0}, obs.stock_id, obs.period, s});
  }
  return records;
}

std::vector<ImportanceRecord> attribute_panel(const ModelConfig& cfg, const ModelParams& params,
                                              const Panel& panel,
                                              const std::vector<int32_t>& stock_indices,
                                              FeatureLevel level, bool parallel) {
  const int n = static_cast<int>(panel.observations.size());
  std::vector<std::vector<ImportanceRecord>> per_obs(static_cast<std::size_t>(n));

  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
      per_obs[static_cast<std::size_t>(i)] =
          local_importance(cfg, params, panel.observations[static_cast<std::size_t>(i)],
                           stock_indices[static_cast<std::size_t>(i)], level);
    }
  } else {
    for (int i = 0; i < n; ++i) {
      per_obs[static_cast<std::size_t>(i)] =
          local_importance(cfg, params, panel.observations[static_cast<std::size_t>(i)],
                           stock_indices[static_cast<std::size_t>(i)], level);
    }
  }

  std::vector<ImportanceRecord> out;
  for (auto& chunk : per_obs)
    for (ImportanceRecord& r : chunk) out.push_back(std::move(r));
  return out;
}

std::vector<AggregateImportance> aggregate(std::span<const ImportanceRecord> records,
                                           int64_t min_freq, bool sum_scores) {
  if (min_freq < 1) throw std::invalid_argument("aggregate: min_freq must be >= 1");

  struct Bucket {
    double abs_sum = 0.0, pos_sum = 0.0, neg_sum = 0.0, signed_sum = 0.0;
    int64_t freq = 0;
  };
  std::map<FeatureKey, Bucket> buckets;
  for (const ImportanceRecord& r : records) {
    Bucket& b = buckets[r.feature];
    b.abs_sum += std::abs(r.score);
    if (r.score >= 0.0)
      b.pos_sum += r.score;
    else
      b.neg_sum += -r.score;
    b.signed_sum += r.score;
    b.freq += 1;
  }

  std::vector<AggregateImportance> out;
  for (const auto& [key, b] : buckets) {
    if (b.freq < min_freq) continue;
    AggregateImportance agg;
    agg.feature = key;
    agg.freq = b.freq;
    agg.abs_importance = sum_scores ? b.abs_sum : b.abs_sum / static_cast<double>(b.freq);
    if (b.abs_sum > 0.0) {
      agg.pos_pct = b.pos_sum / b.abs_sum;
      agg.neg_pct = b.neg_sum / b.abs_sum;
    } else {
      agg.pos_pct = 0.5;
      agg.neg_pct = 0.5;
    }
    agg.signed_mean = b.signed_sum / static_cast<double>(b.freq);
    out.push_back(agg);
  }
  std::sort(out.begin(), out.end(), [](const AggregateImportance& x, const AggregateImportance& y) {
    if (x.abs_importance != y.abs_importance) return x.abs_importance > y.abs_importance;
    return x.feature < y.feature;
  });
  return out;
}

PolarityTables polarity_tables(std::span<const AggregateImportance> aggregates, std::size_t top_n) {
  PolarityTables tables;
  for (const AggregateImportance& a : aggregates) {
    if (a.signed_mean > 0.0) tables.positive.push_back(a);
    if (a.signed_mean < 0.0) tables.negative.push_back(a);
  }
  auto by_signed_desc = [](const AggregateImportance& x, const AggregateImportance& y) {
    if (x.signed_mean != y.signed_mean) return x.signed_mean > y.signed_mean;
    return x.feature < y.feature;
  };
  auto by_signed_asc = [](const AggregateImportance& x, const AggregateImportance& y) {
    if (x.signed_mean != y.signed_mean) return x.signed_mean < y.signed_mean;
    return x.feature < y.feature;
  };
  std::sort(tables.positive.begin(), tables.positive.end(), by_signed_desc);
  std::sort(tables.negative.begin(), tables.negative.end(), by_signed_asc);
  if (tables.positive.size() > top_n) tables.positive.resize(top_n);
  if (tables.negative.size() > top_n) tables.negative.resize(top_n);
  return tables;
}

}  // namespace ser
