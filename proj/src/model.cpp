#include "ser/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "ser/rng.hpp"

namespace ser {

void ModelConfig::validate() const {
  if (embed_dim < 1 || heads < 1 || embed_dim % heads != 0)
    throw std::invalid_argument("model config: embed_dim must be a positive multiple of heads");
  if (daily_layers < 0 || weekly_layers < 0 || mlp_layers < 1)
    throw std::invalid_argument("model config: bad layer counts");
  if (max_events < 1 || days_per_week < 1)
    throw std::invalid_argument("model config: bad sequence sizes");
  if (l2 < 0.0 || lr <= 0.0 || epochs < 1 || batch_size < 1 || init_std <= 0.0)
    throw std::invalid_argument("model config: bad training hyperparameters");
}

ModelParams init_params(const ModelConfig& cfg, int entity_vocab, int action_vocab,
                        int stock_vocab, uint64_t seed) {
  cfg.validate();
  const int m = cfg.embed_dim;
  ModelParams p;
  p.entity_table = Matrix(entity_vocab, m);
  p.action_table = Matrix(action_vocab, m);
  p.stock_table = Matrix(stock_vocab, m);
  p.cls_daily = Matrix(1, m);
  p.cls_weekly = Matrix(1, m);
  auto make_stack = [&](int layers) {
    std::vector<ModelParams::AttentionLayer> stack(static_cast<std::size_t>(layers));
    for (auto& layer : stack) {
      layer.wq.assign(static_cast<std::size_t>(cfg.heads), Matrix(m, cfg.d_k()));
      layer.wk.assign(static_cast<std::size_t>(cfg.heads), Matrix(m, cfg.d_k()));
      layer.wv.assign(static_cast<std::size_t>(cfg.heads), Matrix(m, cfg.d_v()));
      layer.wo = Matrix(cfg.heads * cfg.d_v(), m);
    }
    return stack;
  };
  p.daily = make_stack(cfg.daily_layers);
  p.weekly = make_stack(cfg.weekly_layers);
  for (int s = 0; s < cfg.mlp_layers; ++s) {
    int out = (s == cfg.mlp_layers - 1) ? 1 : m;
    p.mlp_w.push_back(Matrix(m, out));
    p.mlp_b.push_back(Matrix(1, out));
  }

  Rng rng(seed);
  p.for_each([&](Matrix& t) {
    for (double& v : t.data) v = rng.normal(0.0, cfg.init_std);
  });
  return p;
}

ParamVars add_params(ad::Tape& tape, const ModelParams& params) {
  ParamVars vars;
  vars.daily.resize(params.daily.size());
  vars.weekly.resize(params.weekly.size());
  for (std::size_t l = 0; l < params.daily.size(); ++l) {
    vars.daily[l].wq.resize(params.daily[l].wq.size());
    vars.daily[l].wk.resize(params.daily[l].wk.size());
    vars.daily[l].wv.resize(params.daily[l].wv.size());
  }
  for (std::size_t l = 0; l < params.weekly.size(); ++l) {
    vars.weekly[l].wq.resize(params.weekly[l].wq.size());
    vars.weekly[l].wk.resize(params.weekly[l].wk.size());
    vars.weekly[l].wv.resize(params.weekly[l].wv.size());
  }
  vars.mlp_w.resize(params.mlp_w.size());
  vars.mlp_b.resize(params.mlp_b.size());
  zip_tensors(vars, const_cast<ModelParams&>(params),
              [&](ad::Var& v, Matrix& m) { v = tape.input(m); });
  return vars;
}

std::vector<CanonicalEvent> ordered_live_events(const DaySlice& slice) {
  std::vector<CanonicalEvent> events;
  for (int i = 0; i < slice.n_max(); ++i) {
    if (!slice.mask[static_cast<std::size_t>(i)]) continue;
    events.push_back({slice.subject[static_cast<std::size_t>(i)],
                      slice.action[static_cast<std::size_t>(i)],
                      slice.object[static_cast<std::size_t>(i)]});
  }
  std::sort(events.begin(), events.end());
  return events;
}

ad::Var attention_stack(ad::Tape& tape, ad::Var seq, const std::vector<uint8_t>& mask,
                        const std::vector<typename ParamVars::AttentionLayer>& layers,
                        const ModelConfig& cfg) {
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(cfg.d_k()));
  ad::Var x = seq;
  for (const auto& layer : layers) {
    std::vector<ad::Var> heads;
    heads.reserve(layer.wq.size());
    for (std::size_t h = 0; h < layer.wq.size(); ++h) {
      ad::Var q = tape.matmul(x, layer.wq[h]);
      ad::Var k = tape.matmul(x, layer.wk[h]);
      ad::Var v = tape.matmul(x, layer.wv[h]);
      ad::Var scores = tape.scale(tape.matmul_nt(q, k), inv_sqrt_dk);
      ad::Var attn = tape.masked_softmax_rows(scores, mask);
      heads.push_back(tape.matmul(attn, v));
    }
    x = tape.matmul(tape.concat_cols(heads), layer.wo);
  }
  return x;
}

namespace {

// [CLS | event rows | stock] plus its key mask for one slice. Events are
// composed as e_subject + e_action - e_object; padded rows stay in the
// sequence but are masked out of every softmax.
ad::Var day_sequence(ad::Tape& tape, const ModelConfig& cfg, const ParamVars& vars,
                     const DaySlice& slice, int32_t stock_index, std::vector<uint8_t>* mask_out,
                     ForwardHandles* handles) {
  const int n_max = cfg.max_events;
  std::vector<CanonicalEvent> live = ordered_live_events(slice);
  if (static_cast<int>(live.size()) > n_max)
    throw std::invalid_argument("day slice carries more live events than cfg.max_events");

  std::vector<int32_t> subj(static_cast<std::size_t>(n_max), Vocabulary::kPad);
  std::vector<int32_t> act(static_cast<std::size_t>(n_max), Vocabulary::kPad);
  std::vector<int32_t> obj(static_cast<std::size_t>(n_max), Vocabulary::kPad);
  for (std::size_t i = 0; i < live.size(); ++i) {
    subj[i] = live[i].subject_token;
    act[i] = live[i].action_token;
    obj[i] = live[i].object_token;
  }

  ad::Var e_subj = tape.embedding_lookup(vars.entity_table, subj);
  ad::Var e_act = tape.embedding_lookup(vars.action_table, act);
  ad::Var e_obj = tape.embedding_lookup(vars.entity_table, obj);
  ad::Var events = tape.sub(tape.add(e_subj, e_act), e_obj);
  ad::Var stock = tape.embedding_lookup(vars.stock_table, {stock_index});

  if (handles) {
    handles->day_events.push_back(events);
    handles->day_subj.push_back(e_subj);
    handles->day_act.push_back(e_act);
    handles->day_obj.push_back(e_obj);
    handles->live.push_back(live);
  }

  std::vector<ad::Var> parts = {vars.cls_daily, events, stock};
  ad::Var seq = tape.concat_rows(parts);

  mask_out->assign(static_cast<std::size_t>(n_max) + 2, 0);
  (*mask_out)[0] = 1;
  for (std::size_t i = 0; i < live.size(); ++i) (*mask_out)[i + 1] = 1;
  mask_out->back() = 1;
  return seq;
}

}  // namespace

ad::Var daily_forward(ad::Tape& tape, const ModelConfig& cfg, const ParamVars& vars,
                      const DaySlice& slice, int32_t stock_index, ForwardHandles* handles) {
  std::vector<uint8_t> mask;
  ad::Var seq = day_sequence(tape, cfg, vars, slice, stock_index, &mask, handles);
  ad::Var out = attention_stack(tape, seq, mask, vars.daily, cfg);
  return tape.slice_row(out, 0);
}

ad::Var weekly_forward(ad::Tape& tape, const ModelConfig& cfg, const ParamVars& vars,
                       const FirmPeriodObservation& obs, int32_t stock_index,
                       ForwardHandles* handles) {
  if (static_cast<int>(obs.days.size()) != cfg.days_per_week)
    throw std::invalid_argument("weekly_forward: observation has " +
                                std::to_string(obs.days.size()) + " day slices, expected " +
                                std::to_string(cfg.days_per_week));
  std::vector<ad::Var> parts;
  parts.reserve(obs.days.size() + 1);
  parts.push_back(vars.cls_weekly);
  for (const DaySlice& slice : obs.days)
    parts.push_back(daily_forward(tape, cfg, vars, slice, stock_index, handles));
  ad::Var seq = tape.concat_rows(parts);
  std::vector<uint8_t> mask(obs.days.size() + 1, 1);
  ad::Var out = attention_stack(tape, seq, mask, vars.weekly, cfg);
  return tape.slice_row(out, 0);
}

ad::Var mlp_head(ad::Tape& tape, const ModelConfig& cfg, const ParamVars& vars, ad::Var z) {
  ad::Var h = z;
  for (int s = 0; s < cfg.mlp_layers; ++s) {
    h = tape.add(tape.matmul(h, vars.mlp_w[static_cast<std::size_t>(s)]),
                 vars.mlp_b[static_cast<std::size_t>(s)]);
    if (s + 1 < cfg.mlp_layers) h = tape.relu(h);
  }
  return h;
}

ad::Var build_forward(ad::Tape& tape, const ModelConfig& cfg, const ParamVars& vars,
                      const FirmPeriodObservation& obs, int32_t stock_index,
                      ForwardHandles* handles) {
  ad::Var z = (cfg.mode == PanelMode::weekly)
                  ? weekly_forward(tape, cfg, vars, obs, stock_index, handles)
                  : daily_forward(tape, cfg, vars, obs.days.at(0), stock_index, handles);
  return mlp_head(tape, cfg, vars, z);
}

double predict(const ModelConfig& cfg, const ModelParams& params, const FirmPeriodObservation& obs,
               int32_t stock_index) {
  ad::Tape tape;
  ParamVars vars = add_params(tape, params);
  ad::Var out = build_forward(tape, cfg, vars, obs, stock_index);
  return tape.scalar_value(out);
}

std::vector<double> predict_panel(const ModelConfig& cfg, const ModelParams& params,
                                  const Panel& panel, const std::vector<int32_t>& stock_indices,
                                  bool parallel) {
  if (stock_indices.size() != panel.observations.size())
    throw std::invalid_argument("predict_panel: stock index list misaligned with panel");
  const int n = static_cast<int>(panel.observations.size());
  std::vector<double> out(static_cast<std::size_t>(n));
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i)
      out[static_cast<std::size_t>(i)] =
          predict(cfg, params, panel.observations[static_cast<std::size_t>(i)],
                  stock_indices[static_cast<std::size_t>(i)]);
  } else {
    for (int i = 0; i < n; ++i)
      out[static_cast<std::size_t>(i)] =
          predict(cfg, params, panel.observations[static_cast<std::size_t>(i)],
                  stock_indices[static_cast<std::size_t>(i)]);
  }
  return out;
}

// ----------------------------------------------------------------------------
// Training
// ----------------------------------------------------------------------------

TrainReport train(const Panel& panel, const std::vector<int32_t>& stock_indices,
                  const ModelConfig& cfg, int entity_vocab, int action_vocab, int stock_vocab,
                  ModelParams* out_params) {
  cfg.validate();
  if (panel.observations.empty()) throw std::invalid_argument("train: empty panel");
  if (stock_indices.size() != panel.observations.size())
    throw std::invalid_argument("train: stock index list misaligned with panel");

  auto t0 = std::chrono::steady_clock::now();
  ModelParams params =
      init_params(cfg, entity_vocab, action_vocab, stock_vocab, derive_seed(cfg.seed, "init"));

  // Adam state in for_each order.
  std::vector<Matrix> m1, m2;
  params.for_each([&](Matrix& t) {
    m1.push_back(Matrix(t.rows, t.cols));
    m2.push_back(Matrix(t.rows, t.cols));
  });
  const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  long step = 0;

  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  std::vector<std::size_t> order(panel.observations.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainReport report;
  report.seed = cfg.seed;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with the portable rng.
    for (std::size_t i = order.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(shuffle_rng.uniform_index(i));
      std::swap(order[i - 1], order[j]);
    }

    double sse = 0.0;
    std::size_t seen = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      const int bsz = static_cast<int>(end - begin);

      ad::Tape tape;
      ParamVars vars = add_params(tape, params);
      std::vector<ad::Var> preds;
      preds.reserve(static_cast<std::size_t>(bsz));
      Matrix targets(bsz, 1);
      for (std::size_t k = begin; k < end; ++k) {
        const FirmPeriodObservation& obs = panel.observations[order[k]];
        preds.push_back(build_forward(tape, cfg, vars, obs, stock_indices[order[k]]));
        targets.at(static_cast<int>(k - begin), 0) = obs.target_return;
      }
      ad::Var pred_vec = tape.concat_rows(preds);
      ad::Var loss = tape.mean_sq(tape.sub(pred_vec, tape.constant(targets)));
      double loss_value = tape.scalar_value(loss);
      if (!std::isfinite(loss_value))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch starting " + std::to_string(begin));
      sse += loss_value * bsz;
      seen += static_cast<std::size_t>(bsz);

      tape.backward(loss);

      ++step;
      const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      std::size_t ti = 0;
      std::vector<const Matrix*> grads;
      grads.reserve(m1.size());
      vars.for_each([&](const ad::Var& v) { grads.push_back(&tape.grad(v)); });
      params.for_each([&](Matrix& t) {
        const Matrix& g = *grads[ti];
        Matrix& m = m1[ti];
        Matrix& v = m2[ti];
        for (std::size_t i = 0; i < t.data.size(); ++i) {
          double gi = g.data[i] + 2.0 * cfg.l2 * t.data[i];
          m.data[i] = beta1 * m.data[i] + (1.0 - beta1) * gi;
          v.data[i] = beta2 * v.data[i] + (1.0 - beta2) * gi * gi;
          double mhat = m.data[i] / bc1;
          double vhat = v.data[i] / bc2;
          t.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + adam_eps);
        }
        ++ti;
      });
    }
    report.epoch_mse.push_back(sse / static_cast<double>(seen));
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  *out_params = std::move(params);
  return report;
}

// ----------------------------------------------------------------------------
// Window vocabulary
// ----------------------------------------------------------------------------

VocabBundle build_window_vocab(const Panel& train_panel, const VocabBundle& global) {
  VocabBundle window;
  for (const FirmPeriodObservation& obs : train_panel.observations) {
    window.stocks.intern(obs.stock_id);
    for (const DaySlice& slice : obs.days) {
      for (int i = 0; i < slice.n_max(); ++i) {
        if (!slice.mask[static_cast<std::size_t>(i)]) continue;
        window.entities.intern(global.entities.key(slice.subject[static_cast<std::size_t>(i)]));
        window.actions.intern(global.actions.key(slice.action[static_cast<std::size_t>(i)]));
        window.entities.intern(global.entities.key(slice.object[static_cast<std::size_t>(i)]));
      }
    }
  }
  return window;
}

RemappedPanel remap_panel(const Panel& panel, const VocabBundle& global,
                          const VocabBundle& window) {
  auto remap_entity = [&](int32_t id) -> int32_t {
    if (id == Vocabulary::kPad) return Vocabulary::kPad;
    auto w = window.entities.lookup(global.entities.key(id));
    return w.value_or(Vocabulary::kUnk);
  };
  auto remap_action = [&](int32_t id) -> int32_t {
    if (id == Vocabulary::kPad) return Vocabulary::kPad;
    auto w = window.actions.lookup(global.actions.key(id));
    return w.value_or(Vocabulary::kUnk);
  };

  RemappedPanel out;
  out.panel.mode = panel.mode;
  out.panel.observations = panel.observations;
  for (FirmPeriodObservation& obs : out.panel.observations) {
    for (DaySlice& slice : obs.days) {
      for (int i = 0; i < slice.n_max(); ++i) {
        if (!slice.mask[static_cast<std::size_t>(i)]) continue;
        slice.subject[static_cast<std::size_t>(i)] = remap_entity(slice.subject[static_cast<std::size_t>(i)]);
        slice.action[static_cast<std::size_t>(i)] = remap_action(slice.action[static_cast<std::size_t>(i)]);
        slice.object[static_cast<std::size_t>(i)] = remap_entity(slice.object[static_cast<std::size_t>(i)]);
      }
    }
  }
  out.panel.finalize();
  out.stock_indices.reserve(out.panel.observations.size());
  for (const FirmPeriodObservation& obs : out.panel.observations)
    out.stock_indices.push_back(window.stocks.lookup(obs.stock_id));
  return out;
}

// ----------------------------------------------------------------------------
// Checkpoint serialization
// ----------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'S', 'E', 'R', 'C', 'K', 'P', 'T', '1'};

void put_i64(std::ostream& os, int64_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof(v)); }
void put_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), sizeof(v)); }
void put_str(std::ostream& os, const std::string& s) {
  put_i64(os, static_cast<int64_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

int64_t get_i64(std::istream& is) {
  int64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
double get_f64(std::istream& is) {
  double v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::string get_str(std::istream& is) {
  int64_t n = get_i64(is);
  std::string s(static_cast<std::size_t>(n), '\0');
  is.read(s.data(), n);
  return s;
}

void put_vocab(std::ostream& os, const Vocabulary& v) {
  put_i64(os, v.size());
  for (int32_t id = 0; id < v.size(); ++id) {
    put_str(os, v.key(id));
    put_i64(os, v.count(id));
  }
}

Vocabulary get_vocab(std::istream& is) {
  Vocabulary v;
  int64_t n = get_i64(is);
  for (int64_t id = 0; id < n; ++id) {
    std::string key = get_str(is);
    int64_t count = get_i64(is);
    // PAD/UNK are already seeded by the constructor with count 1.
    int32_t got = (id < 2) ? static_cast<int32_t>(id) : v.intern(key);
    v.add_count(got, count - 1);
  }
  return v;
}

void put_matrix(std::ostream& os, const Matrix& m) {
  put_i64(os, m.rows);
  put_i64(os, m.cols);
  os.write(reinterpret_cast<const char*>(m.data.data()),
           static_cast<std::streamsize>(m.data.size() * sizeof(double)));
}

Matrix get_matrix(std::istream& is) {
  int64_t r = get_i64(is), c = get_i64(is);
  Matrix m(static_cast<int>(r), static_cast<int>(c));
  is.read(reinterpret_cast<char*>(m.data.data()),
          static_cast<std::streamsize>(m.data.size() * sizeof(double)));
  return m;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
  os.write(kMagic, sizeof(kMagic));

  const ModelConfig& c = ckpt.cfg;
  put_i64(os, c.embed_dim);
  put_i64(os, c.heads);
  put_i64(os, c.daily_layers);
  put_i64(os, c.weekly_layers);
  put_i64(os, c.mlp_layers);
  put_i64(os, c.max_events);
  put_i64(os, c.days_per_week);
  put_f64(os, c.l2);
  put_f64(os, c.lr);
  put_i64(os, c.epochs);
  put_i64(os, c.batch_size);
  put_f64(os, c.init_std);
  put_i64(os, static_cast<int64_t>(c.seed));
  put_i64(os, c.mode == PanelMode::weekly ? 1 : 0);

  put_vocab(os, ckpt.vocab.entities);
  put_vocab(os, ckpt.vocab.actions);
  put_i64(os, ckpt.vocab.stocks.size());
  for (int32_t i = 0; i < ckpt.vocab.stocks.size(); ++i) put_i64(os, ckpt.vocab.stocks.external(i));

  int64_t tensor_count = 0;
  ckpt.params.for_each([&](const Matrix&) { ++tensor_count; });
  put_i64(os, tensor_count);
  ckpt.params.for_each([&](const Matrix& m) { put_matrix(os, m); });
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);

  Checkpoint ckpt;
  ModelConfig& c = ckpt.cfg;
  c.embed_dim = static_cast<int>(get_i64(is));
  c.heads = static_cast<int>(get_i64(is));
  c.daily_layers = static_cast<int>(get_i64(is));
  c.weekly_layers = static_cast<int>(get_i64(is));
  c.mlp_layers = static_cast<int>(get_i64(is));
  c.max_events = static_cast<int>(get_i64(is));
  c.days_per_week = static_cast<int>(get_i64(is));
  c.l2 = get_f64(is);
  c.lr = get_f64(is);
  c.epochs = static_cast<int>(get_i64(is));
  c.batch_size = static_cast<int>(get_i64(is));
  c.init_std = get_f64(is);
  c.seed = static_cast<uint64_t>(get_i64(is));
  c.mode = get_i64(is) == 1 ? PanelMode::weekly : PanelMode::daily;

  ckpt.vocab.entities = get_vocab(is);
  ckpt.vocab.actions = get_vocab(is);
  int64_t n_stocks = get_i64(is);
  for (int64_t i = 0; i < n_stocks; ++i) {
    int64_t sid = get_i64(is);
    if (i == 0) continue;  // UNK placeholder
    ckpt.vocab.stocks.intern(sid);
  }

  ckpt.params = init_params(c, ckpt.vocab.entities.size(), ckpt.vocab.actions.size(),
                            ckpt.vocab.stocks.size(), /*seed=*/0);
  int64_t tensor_count = get_i64(is);
  int64_t seen = 0;
  ckpt.params.for_each([&](Matrix& m) {
    m = get_matrix(is);
    ++seen;
  });
  if (seen != tensor_count || !is)
    throw std::runtime_error("checkpoint is truncated or inconsistent: " + path);
  return ckpt;
}

}  // namespace ser
