// The SER network: TransE event composition, masked multi-head attention over
// [CLS | events | stock] sequences, hierarchical weekly aggregation, MLP head,
// and MSE + L2 training with adaptive-moment updates.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ser/autodiff.hpp"
#include "ser/events.hpp"
#include "ser/linalg.hpp"

namespace ser {

using lin::Matrix;

struct ModelConfig {
  int embed_dim = 64;     // M
  int heads = 4;          // H
  int daily_layers = 2;   // L
  int weekly_layers = 2;  // P
  int mlp_layers = 2;     // S
  int max_events = 30;    // N_max per day
  int days_per_week = 5;  // D
  double l2 = 1e-5;
  double lr = 1e-3;
  int epochs = 30;
  int batch_size = 64;
  double init_std = 0.02;
  uint64_t seed = 42;
  PanelMode mode = PanelMode::daily;

  int d_k() const { return embed_dim / heads; }
  int d_v() const { return embed_dim / heads; }
  void validate() const;
};

// All learnable tensors, shared layout between value matrices (ModelParams)
// and their tape handles (ParamVars).
template <typename T>
struct ModelTensors {
  struct AttentionLayer {
    std::vector<T> wq, wk, wv;  // per head: MxD_k, MxD_k, MxD_v
    T wo;                       // (H*D_v)xM
  };

  T entity_table, action_table, stock_table;
  T cls_daily, cls_weekly;
  std::vector<AttentionLayer> daily, weekly;
  std::vector<T> mlp_w, mlp_b;

  template <class Fn>
  void for_each(Fn&& fn) {
    fn(entity_table);
    fn(action_table);
    fn(stock_table);
    fn(cls_daily);
    fn(cls_weekly);
    for (auto* stack : {&daily, &weekly}) {
      for (AttentionLayer& layer : *stack) {
        for (T& w : layer.wq) fn(w);
        for (T& w : layer.wk) fn(w);
        for (T& w : layer.wv) fn(w);
        fn(layer.wo);
      }
    }
    for (T& w : mlp_w) fn(w);
    for (T& b : mlp_b) fn(b);
  }

  template <class Fn>
  void for_each(Fn&& fn) const {
    const_cast<ModelTensors*>(this)->for_each([&](T& t) { fn(static_cast<const T&>(t)); });
  }
};

using ModelParams = ModelTensors<Matrix>;
using ParamVars = ModelTensors<ad::Var>;

template <typename A, typename B, class Fn>
void zip_tensors(A& a, B& b, Fn&& fn) {
  std::vector<typename std::remove_reference_t<decltype(a.entity_table)>*> lhs;
  std::vector<typename std::remove_reference_t<decltype(b.entity_table)>*> rhs;
  a.for_each([&](auto& t) { lhs.push_back(&t); });
  b.for_each([&](auto& t) { rhs.push_back(&t); });
  for (std::size_t i = 0; i < lhs.size(); ++i) fn(*lhs[i], *rhs[i]);
}

ModelParams init_params(const ModelConfig& cfg, int entity_vocab, int action_vocab,
                        int stock_vocab, uint64_t seed);

// Registers every tensor as a tape input in for_each order.
ParamVars add_params(ad::Tape& tape, const ModelParams& params);

// Live events of a slice in canonical (sorted) order, so a day's encoding is
// exactly invariant under input permutation.
std::vector<CanonicalEvent> ordered_live_events(const DaySlice& slice);

// Attention stack over a TxM sequence; key positions with mask false receive
// exactly zero weight. Returns the transformed TxM sequence.
ad::Var attention_stack(ad::Tape& tape, ad::Var seq, const std::vector<uint8_t>& mask,
                        const std::vector<typename ParamVars::AttentionLayer>& layers,
                        const ModelConfig& cfg);

// Tape nodes of interest for gradient x input attribution: the composed event
// rows and the raw lookup rows, one entry per day slice, with the live events
// in canonical order.
struct ForwardHandles {
  std::vector<ad::Var> day_events;  // composed z rows, N_max x M per day
  std::vector<ad::Var> day_subj, day_act, day_obj;
  std::vector<std::vector<CanonicalEvent>> live;
};

// Daily pass for one slice: [CLS | composed events | stock] -> CLS row.
ad::Var daily_forward(ad::Tape& tape, const ModelConfig& cfg, const ParamVars& vars,
                      const DaySlice& slice, int32_t stock_index,
                      ForwardHandles* handles = nullptr);

// Weekly pass: D daily summaries under a weekly CLS -> weekly CLS row.
ad::Var weekly_forward(ad::Tape& tape, const ModelConfig& cfg, const ParamVars& vars,
                       const FirmPeriodObservation& obs, int32_t stock_index,
                       ForwardHandles* handles = nullptr);

ad::Var mlp_head(ad::Tape& tape, const ModelConfig& cfg, const ParamVars& vars, ad::Var z);

// Full forward to a 1x1 prediction. The observation must already be remapped
// to the vocabulary the parameters were trained with.
ad::Var build_forward(ad::Tape& tape, const ModelConfig& cfg, const ParamVars& vars,
                      const FirmPeriodObservation& obs, int32_t stock_index,
                      ForwardHandles* handles = nullptr);

double predict(const ModelConfig& cfg, const ModelParams& params, const FirmPeriodObservation& obs,
               int32_t stock_index);

// Predictions for every observation; parallel across observations with
// deterministic per-slot writes.
std::vector<double> predict_panel(const ModelConfig& cfg, const ModelParams& params,
                                  const Panel& panel, const std::vector<int32_t>& stock_indices,
                                  bool parallel = true);

struct TrainReport {
  std::vector<double> epoch_mse;
  uint64_t seed = 0;
  double wall_seconds = 0.0;
};

// Mini-batch training of MSE + l2*sum(theta^2) with Adam-style moments.
// Deterministic given cfg.seed. Throws on NaN loss.
TrainReport train(const Panel& panel, const std::vector<int32_t>& stock_indices,
                  const ModelConfig& cfg, int entity_vocab, int action_vocab, int stock_vocab,
                  ModelParams* out_params);

// --------------------------------------------------------------------------
// Window vocabulary handling: per training window the model sees a fresh
// vocabulary built from the train split only; tokens outside it map to UNK.
// --------------------------------------------------------------------------

VocabBundle build_window_vocab(const Panel& train_panel, const VocabBundle& global);

// Remaps observations from global ids to window ids (unseen -> UNK) and
// resolves each observation's stock index in the window stock vocab.
struct RemappedPanel {
  Panel panel;
  std::vector<int32_t> stock_indices;  // aligned with panel.observations
};
RemappedPanel remap_panel(const Panel& panel, const VocabBundle& global,
                          const VocabBundle& window);

// --------------------------------------------------------------------------
// Checkpoints: versioned binary file carrying config, the window vocabulary
// and every tensor row-major. Round-trips bitwise.
// --------------------------------------------------------------------------

struct Checkpoint {
  ModelConfig cfg;
  VocabBundle vocab;
  ModelParams params;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ser
