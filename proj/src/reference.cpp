#include "ser/reference.hpp"

#include <cmath>

namespace ser::ref {

namespace {

using Row = std::vector<double>;
using Seq = std::vector<Row>;

Row table_row(const Matrix& table, int32_t id) {
  Row r(static_cast<std::size_t>(table.cols));
  for (int j = 0; j < table.cols; ++j) r[static_cast<std::size_t>(j)] = table.at(id, j);
  return r;
}

// x (1xM rows) times w (MxK), explicit loops.
Seq project(const Seq& x, const Matrix& w) {
  Seq out(x.size(), Row(static_cast<std::size_t>(w.cols), 0.0));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (int k = 0; k < w.rows; ++k) {
      double xi = x[i][static_cast<std::size_t>(k)];
      for (int j = 0; j < w.cols; ++j) out[i][static_cast<std::size_t>(j)] += xi * w.at(k, j);
    }
  return out;
}

Seq attention_layer(const Seq& x, const ModelParams::AttentionLayer& layer, int d_k) {
  const std::size_t t = x.size();
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(d_k));
  Seq heads_concat(t);
  for (std::size_t h = 0; h < layer.wq.size(); ++h) {
    Seq q = project(x, layer.wq[h]);
    Seq k = project(x, layer.wk[h]);
    Seq v = project(x, layer.wv[h]);
    for (std::size_t i = 0; i < t; ++i) {
      // softmax over keys
      std::vector<double> score(t, 0.0);
      double mx = -1e300;
      for (std::size_t j = 0; j < t; ++j) {
        double s = 0.0;
        for (std::size_t d = 0; d < q[i].size(); ++d) s += q[i][d] * k[j][d];
        score[j] = s * inv_sqrt_dk;
        if (score[j] > mx) mx = score[j];
      }
      double denom = 0.0;
      for (std::size_t j = 0; j < t; ++j) {
        score[j] = std::exp(score[j] - mx);
        denom += score[j];
      }
      Row ctx(v[0].size(), 0.0);
      for (std::size_t j = 0; j < t; ++j) {
        double w = score[j] / denom;
        for (std::size_t d = 0; d < ctx.size(); ++d) ctx[d] += w * v[j][d];
      }
      for (double c : ctx) heads_concat[i].push_back(c);
    }
  }
  // output projection
  Seq out(t, Row(static_cast<std::size_t>(layer.wo.cols), 0.0));
  for (std::size_t i = 0; i < t; ++i)
    for (int k = 0; k < layer.wo.rows; ++k) {
      double xi = heads_concat[i][static_cast<std::size_t>(k)];
      for (int j = 0; j < layer.wo.cols; ++j)
        out[i][static_cast<std::size_t>(j)] += xi * layer.wo.at(k, j);
    }
  return out;
}

Row daily_summary(const ModelConfig& cfg, const ModelParams& params, const Inputs& in,
                  const Inputs::Day& day) {
  Seq seq;
  seq.push_back(in.cls_daily);
  for (std::size_t e = 0; e < day.subj.size(); ++e) {
    Row z(day.subj[e].size());
    for (std::size_t d = 0; d < z.size(); ++d) z[d] = day.subj[e][d] + day.act[e][d] - day.obj[e][d];
    seq.push_back(std::move(z));
  }
  seq.push_back(in.stock);
  for (const auto& layer : params.daily) seq = attention_layer(seq, layer, cfg.d_k());
  return seq[0];
}

double mlp(const ModelConfig& cfg, const ModelParams& params, Row h) {
  for (int s = 0; s < cfg.mlp_layers; ++s) {
    const Matrix& w = params.mlp_w[static_cast<std::size_t>(s)];
    const Matrix& b = params.mlp_b[static_cast<std::size_t>(s)];
    Row next(static_cast<std::size_t>(w.cols), 0.0);
    for (int k = 0; k < w.rows; ++k)
      for (int j = 0; j < w.cols; ++j)
        next[static_cast<std::size_t>(j)] += h[static_cast<std::size_t>(k)] * w.at(k, j);
    for (int j = 0; j < w.cols; ++j) next[static_cast<std::size_t>(j)] += b.at(0, j);
    if (s + 1 < cfg.mlp_layers)
      for (double& v : next) v = v > 0.0 ? v : 0.0;
    h = std::move(next);
  }
  return h[0];
}

}  // namespace

Inputs materialize(const ModelConfig& cfg, const ModelParams& params,
                   const FirmPeriodObservation& obs, int32_t stock_index) {
  Inputs in;
  in.cls_daily = table_row(params.cls_daily, 0);
  in.cls_weekly = table_row(params.cls_weekly, 0);
  in.stock = table_row(params.stock_table, stock_index);
  for (const DaySlice& slice : obs.days) {
    Inputs::Day day;
    for (const CanonicalEvent& ev : ordered_live_events(slice)) {
      day.subj.push_back(table_row(params.entity_table, ev.subject_token));
      day.act.push_back(table_row(params.action_table, ev.action_token));
      day.obj.push_back(table_row(params.entity_table, ev.object_token));
    }
    in.days.push_back(std::move(day));
  }
  return in;
}

double forward(const ModelConfig& cfg, const ModelParams& params, const Inputs& in) {
  if (cfg.mode == PanelMode::daily) {
    return mlp(cfg, params, daily_summary(cfg, params, in, in.days.at(0)));
  }
  Seq seq;
  seq.push_back(in.cls_weekly);
  for (const Inputs::Day& day : in.days) seq.push_back(daily_summary(cfg, params, in, day));
  for (const auto& layer : params.weekly) seq = attention_layer(seq, layer, cfg.d_k());
  return mlp(cfg, params, seq[0]);
}

double forward_obs(const ModelConfig& cfg, const ModelParams& params,
                   const FirmPeriodObservation& obs, int32_t stock_index) {
  return forward(cfg, params, materialize(cfg, params, obs, stock_index));
}

}  // namespace ser::ref
