// Command-line surface tying the pipeline together:
//   extract -> build -> train -> predict -> attribute -> sort / fmb / comove /
//   topics, plus synth for test data. See README for usage.
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "ser/pipeline.hpp"

namespace {

using namespace ser;

RunConfig load_config(const std::string& config_path, const std::string& mode, uint64_t seed,
                      bool seed_set) {
  RunConfig cfg;
  if (!config_path.empty()) cfg = RunConfig::load(config_path);
  if (mode == "weekly")
    cfg.model.mode = PanelMode::weekly;
  else if (mode == "daily")
    cfg.model.mode = PanelMode::daily;
  else if (!mode.empty())
    throw CLI::ValidationError("--mode must be daily or weekly");
  if (seed_set) {
    cfg.seed = seed;
    cfg.model.seed = seed;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"structured-event return prediction pipeline"};
  app.require_subcommand(1);

  std::string config_path, mode, out = "out";
  uint64_t seed = 42;
  bool seed_set = false;
  app.add_option("--config", config_path, "JSON run configuration")->envname("SER_CONFIG");
  app.add_option("--mode", mode, "daily or weekly");
  app.add_option("--seed", seed, "root seed")->each([&](const std::string&) { seed_set = true; });
  app.add_option("--out", out, "output directory");

  // extract
  auto* extract = app.add_subcommand("extract", "extract events from articles");
  std::string articles_path, replay_path, endpoint_url, endpoint_path = "/v1/chat/completions",
                                                        endpoint_model = "gpt-3.5-turbo-0125";
  int max_attempts = 3;
  extract->add_option("--articles", articles_path, "articles JSONL")->required();
  extract->add_option("--replay", replay_path, "replay fixture JSON (offline provider)");
  extract->add_option("--endpoint", endpoint_url, "chat-completion base URL");
  extract->add_option("--endpoint-path", endpoint_path, "chat-completion POST path");
  extract->add_option("--model", endpoint_model, "model name sent to the endpoint");
  extract->add_option("--max-attempts", max_attempts, "retry budget per article");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a planted-signal panel");
  SynthSpec synth_spec;
  double planted_effect = 0.02, planted_prob = 0.1;
  int planted_count = 1;
  synth->add_option("--stocks", synth_spec.stocks, "stock count");
  synth->add_option("--periods", synth_spec.periods, "period count");
  synth->add_option("--entity-vocab", synth_spec.entity_vocab, "entity vocabulary size");
  synth->add_option("--action-vocab", synth_spec.action_vocab, "action vocabulary size");
  synth->add_option("--events-min", synth_spec.events_min, "min background events per obs");
  synth->add_option("--events-max", synth_spec.events_max, "max background events per obs");
  synth->add_option("--noise-sd", synth_spec.noise_sd, "target noise sd");
  synth->add_option("--planted-effect", planted_effect, "per-event target effect");
  synth->add_option("--planted-prob", planted_prob, "per-obs planted occurrence probability");
  synth->add_option("--planted-count", planted_count, "number of planted events");

  // build
  auto* build = app.add_subcommand("build", "canonicalize events into a panel");
  std::string events_path, returns_path;
  int n_max = 30;
  build->add_option("--events", events_path, "raw events JSONL")->required();
  build->add_option("--returns", returns_path, "returns CSV (required for weekly)");
  build->add_option("--n-max", n_max, "events per day slot");

  // train
  auto* train_cmd = app.add_subcommand("train", "train the model");
  std::string panel_path, vocab_path;
  bool rolling = false, extend_tail = false;
  int train_years = 5, test_years = 1;
  train_cmd->add_option("--panel", panel_path, "panel JSONL")->required();
  train_cmd->add_option("--vocab", vocab_path, "vocab JSON")->required();
  train_cmd->add_flag("--rolling", rolling, "rolling-window walk-forward protocol");
  train_cmd->add_option("--train-years", train_years, "training window span");
  train_cmd->add_option("--test-years", test_years, "test window span");
  train_cmd->add_flag("--extend-tail", extend_tail, "anchor late training windows");

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "predict with a checkpoint");
  std::string checkpoint_path;
  predict_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  predict_cmd->add_option("--panel", panel_path, "panel JSONL")->required();
  predict_cmd->add_option("--vocab", vocab_path, "vocab JSON")->required();

  // attribute
  auto* attribute_cmd = app.add_subcommand("attribute", "gradient x input importance");
  attribute_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  attribute_cmd->add_option("--panel", panel_path, "panel JSONL")->required();
  attribute_cmd->add_option("--vocab", vocab_path, "vocab JSON")->required();
  bool sum_scores = false;
  attribute_cmd->add_flag("--sum", sum_scores, "report summed rather than mean |score|");

  // sort
  auto* sort_cmd = app.add_subcommand("sort", "quintile long-short evaluation");
  std::string signal_path, factors_path;
  sort_cmd->add_option("--signal", signal_path, "signal CSV")->required();
  sort_cmd->add_option("--returns", returns_path, "returns CSV")->required();
  sort_cmd->add_option("--factors", factors_path, "factor CSV (optional)");

  // fmb
  auto* fmb_cmd = app.add_subcommand("fmb", "Fama-MacBeth regressions");
  fmb_cmd->add_option("--signal", signal_path, "signal CSV")->required();
  fmb_cmd->add_option("--returns", returns_path, "returns CSV")->required();

  // comove
  auto* comove_cmd = app.add_subcommand("comove", "entity-driven comovement");
  std::string importance_path;
  comove_cmd->add_option("--panel", panel_path, "panel JSONL")->required();
  comove_cmd->add_option("--vocab", vocab_path, "vocab JSON")->required();
  comove_cmd->add_option("--returns", returns_path, "returns CSV")->required();
  comove_cmd->add_option("--importance", importance_path, "entity importance CSV")->required();

  // topics
  auto* topics_cmd = app.add_subcommand("topics", "LDA topic importance");
  topics_cmd->add_option("--events", events_path, "raw events JSONL")->required();
  topics_cmd->add_option("--panel", panel_path, "panel JSONL")->required();
  topics_cmd->add_option("--vocab", vocab_path, "vocab JSON")->required();
  topics_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  int topics_k = 25;
  topics_cmd->add_option("--topics", topics_k, "number of topics");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = load_config(config_path, mode, seed, seed_set);

    if (extract->parsed()) {
      ExtractOptions opts;
      opts.articles_path = articles_path;
      opts.max_attempts = max_attempts;
      opts.out_events = out + "/extracted.jsonl";
      opts.out_summary = out + "/extract_summary.json";
      std::filesystem::create_directories(out);
      if (!replay_path.empty()) {
        opts.provider = ReplayProvider(replay_path);
      } else if (!endpoint_url.empty()) {
        opts.provider = HttpChatProvider(endpoint_url, endpoint_path, endpoint_model);
      } else {
        std::cerr << "extract: need --replay or --endpoint\n";
        return 2;
      }
      return cmd_extract(opts);
    }
    if (synth->parsed()) {
      synth_spec.seed = cfg.seed;
      for (int i = 0; i < planted_count; ++i) {
        PlantedEvent p;
        p.subject = "Planted_Subject_" + std::to_string(i);
        p.action = "boost";
        p.object = "Planted_Object_" + std::to_string(i);
        p.effect = planted_effect;
        p.prob = planted_prob;
        synth_spec.planted.push_back(p);
      }
      return cmd_synth({synth_spec, out});
    }
    if (build->parsed()) {
      BuildOptions opts;
      opts.events_path = events_path;
      opts.returns_path = returns_path;
      opts.mode = cfg.model.mode;
      opts.n_max = n_max;
      opts.days_per_week = cfg.model.days_per_week;
      opts.out_dir = out;
      return cmd_build(opts);
    }
    if (train_cmd->parsed()) {
      TrainOptions opts;
      opts.panel_path = panel_path;
      opts.vocab_path = vocab_path;
      opts.cfg = cfg.model;
      opts.rolling = rolling;
      opts.train_years = train_years;
      opts.test_years = test_years;
      opts.extend_tail = extend_tail;
      opts.out_dir = out;
      return cmd_train(opts);
    }
    if (predict_cmd->parsed()) {
      PredictOptions opts;
      opts.checkpoint_path = checkpoint_path;
      opts.panel_path = panel_path;
      opts.vocab_path = vocab_path;
      std::filesystem::create_directories(out);
      opts.out_signal = out + "/signal.csv";
      opts.out_summary = out + "/predict_summary.json";
      return cmd_predict(opts);
    }
    if (attribute_cmd->parsed()) {
      AttributeOptions opts;
      opts.checkpoint_path = checkpoint_path;
      opts.panel_path = panel_path;
      opts.vocab_path = vocab_path;
      opts.min_freq_event = cfg.min_freq_event;
      opts.min_freq_entity = cfg.min_freq_entity;
      opts.polarity_top_n = cfg.polarity_top_n;
      opts.sum_scores = sum_scores;
      opts.out_dir = out;
      return cmd_attribute(opts);
    }
    if (sort_cmd->parsed()) {
      SortOptions opts;
      opts.signal_path = signal_path;
      opts.returns_path = returns_path;
      opts.factors_path = factors_path;
      opts.periods_per_year = cfg.periods_per_year;
      opts.delays = cfg.delays;
      opts.out_dir = out;
      return cmd_sort(opts);
    }
    if (fmb_cmd->parsed()) {
      FmbOptions opts;
      opts.signal_path = signal_path;
      opts.returns_path = returns_path;
      opts.control_windows = cfg.control_windows;
      opts.standardize = cfg.fmb_standardize;
      opts.nw_lags = cfg.nw_lags;
      opts.out_dir = out;
      return cmd_fmb(opts);
    }
    if (comove_cmd->parsed()) {
      ComoveOptions opts;
      opts.panel_path = panel_path;
      opts.vocab_path = vocab_path;
      opts.returns_path = returns_path;
      opts.entity_importance_path = importance_path;
      opts.focal_entities = cfg.focal_entities;
      opts.top_k = cfg.top_k;
      opts.min_firms = cfg.min_firms;
      opts.shift = cfg.shift;
      opts.min_shocks = cfg.min_shocks;
      opts.taus = cfg.taus;
      opts.group_hi = cfg.group_hi;
      opts.group_lo = cfg.group_lo;
      opts.out_dir = out;
      return cmd_comove(opts);
    }
    if (topics_cmd->parsed()) {
      TopicsOptions opts;
      opts.events_path = events_path;
      opts.panel_path = panel_path;
      opts.vocab_path = vocab_path;
      opts.checkpoint_path = checkpoint_path;
      opts.topics = topics_k;
      opts.alpha = cfg.lda_alpha;
      opts.beta = cfg.lda_beta;
      opts.iterations = cfg.lda_iterations;
      opts.seed = cfg.seed;
      opts.out_dir = out;
      return cmd_topics(opts);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
