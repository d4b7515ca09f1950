#include "ser/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "ser/attribution.hpp"
#include "ser/comovement.hpp"
#include "ser/io.hpp"
#include "ser/rng.hpp"
#include "ser/topics.hpp"
#include "ser/util.hpp"

namespace ser {

using nlohmann::json;
namespace fs = std::filesystem;

// ----------------------------------------------------------------------------
// RunConfig
// ----------------------------------------------------------------------------

std::string RunConfig::to_json() const {
  json j;
  json m;
  m["embed_dim"] = model.embed_dim;
  m["heads"] = model.heads;
  m["daily_layers"] = model.daily_layers;
  m["weekly_layers"] = model.weekly_layers;
  m["mlp_layers"] = model.mlp_layers;
  m["max_events"] = model.max_events;
  m["days_per_week"] = model.days_per_week;
  m["l2"] = model.l2;
  m["lr"] = model.lr;
  m["epochs"] = model.epochs;
  m["batch_size"] = model.batch_size;
  m["init_std"] = model.init_std;
  m["mode"] = model.mode == PanelMode::weekly ? "weekly" : "daily";
  j["model"] = std::move(m);

  j["min_freq_event"] = min_freq_event;
  j["min_freq_entity"] = min_freq_entity;
  j["polarity_top_n"] = polarity_top_n;
  j["nw_lags"] = nw_lags;
  j["periods_per_year"] = periods_per_year;
  j["delays"] = delays;
  j["control_windows"] = control_windows;
  j["fmb_standardize"] = fmb_standardize;
  j["top_k"] = top_k;
  j["min_firms"] = min_firms;
  j["shift"] = shift;
  j["min_shocks"] = min_shocks;
  j["focal_entities"] = focal_entities;
  j["taus"] = taus;
  j["group_hi"] = group_hi;
  j["group_lo"] = group_lo;
  j["lda_topics"] = lda_topics;
  j["lda_alpha"] = lda_alpha;
  j["lda_beta"] = lda_beta;
  j["lda_iterations"] = lda_iterations;
  j["seed"] = seed;
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  RunConfig cfg;
  if (j.contains("model")) {
    const json& m = j["model"];
    cfg.model.embed_dim = m.value("embed_dim", cfg.model.embed_dim);
    cfg.model.heads = m.value("heads", cfg.model.heads);
    cfg.model.daily_layers = m.value("daily_layers", cfg.model.daily_layers);
    cfg.model.weekly_layers = m.value("weekly_layers", cfg.model.weekly_layers);
    cfg.model.mlp_layers = m.value("mlp_layers", cfg.model.mlp_layers);
    cfg.model.max_events = m.value("max_events", cfg.model.max_events);
    cfg.model.days_per_week = m.value("days_per_week", cfg.model.days_per_week);
    cfg.model.l2 = m.value("l2", cfg.model.l2);
    cfg.model.lr = m.value("lr", cfg.model.lr);
    cfg.model.epochs = m.value("epochs", cfg.model.epochs);
    cfg.model.batch_size = m.value("batch_size", cfg.model.batch_size);
    cfg.model.init_std = m.value("init_std", cfg.model.init_std);
    cfg.model.mode = m.value("mode", "daily") == std::string("weekly") ? PanelMode::weekly
                                                                       : PanelMode::daily;
  }
  cfg.min_freq_event = j.value("min_freq_event", cfg.min_freq_event);
  cfg.min_freq_entity = j.value("min_freq_entity", cfg.min_freq_entity);
  cfg.polarity_top_n = j.value("polarity_top_n", cfg.polarity_top_n);
  cfg.nw_lags = j.value("nw_lags", cfg.nw_lags);
  cfg.periods_per_year = j.value("periods_per_year", cfg.periods_per_year);
  cfg.delays = j.value("delays", cfg.delays);
  cfg.control_windows = j.value("control_windows", cfg.control_windows);
  cfg.fmb_standardize = j.value("fmb_standardize", cfg.fmb_standardize);
  cfg.top_k = j.value("top_k", cfg.top_k);
  cfg.min_firms = j.value("min_firms", cfg.min_firms);
  cfg.shift = j.value("shift", cfg.shift);
  cfg.min_shocks = j.value("min_shocks", cfg.min_shocks);
  cfg.focal_entities = j.value("focal_entities", cfg.focal_entities);
  cfg.taus = j.value("taus", cfg.taus);
  cfg.group_hi = j.value("group_hi", cfg.group_hi);
  cfg.group_lo = j.value("group_lo", cfg.group_lo);
  cfg.lda_topics = j.value("lda_topics", cfg.lda_topics);
  cfg.lda_alpha = j.value("lda_alpha", cfg.lda_alpha);
  cfg.lda_beta = j.value("lda_beta", cfg.lda_beta);
  cfg.lda_iterations = j.value("lda_iterations", cfg.lda_iterations);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.model.seed = cfg.seed;
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) { return from_json(read_file(path)); }

// ----------------------------------------------------------------------------
// extract
// ----------------------------------------------------------------------------

std::vector<ArticleRow> read_articles_jsonl(const std::string& path) {
  std::vector<ArticleRow> rows;
  std::istringstream all(read_file(path));
  std::string line;
  while (std::getline(all, line)) {
    if (trim(line).empty()) continue;
    json obj = json::parse(line);
    ArticleRow row;
    row.id = obj.value("id", std::to_string(rows.size()));
    row.date = obj.value("date", "");
    if (obj.contains("stock_id") && !obj["stock_id"].is_null())
      row.stock_id = obj["stock_id"].get<int64_t>();
    row.text = obj.at("text").get<std::string>();
    rows.push_back(std::move(row));
  }
  return rows;
}

int cmd_extract(const ExtractOptions& opts) {
  std::vector<ArticleRow> articles = read_articles_jsonl(opts.articles_path);

  std::ofstream out(opts.out_events);
  if (!out) throw std::runtime_error("cannot write file: " + opts.out_events);

  int ok = 0, discarded = 0;
  for (const ArticleRow& article : articles) {
    ExtractionOutcome outcome =
        extract_with_retry(article.text, article.date, opts.provider, opts.max_attempts);
    json obj;
    obj["article_id"] = article.id;
    obj["date"] = article.date;
    if (article.stock_id) obj["stock_id"] = *article.stock_id;
    obj["status"] = outcome.status == ExtractionStatus::ok ? "ok" : "discarded";
    obj["attempts"] = outcome.attempts;
    json events = json::array();
    for (const EventTriplet& ev : outcome.events) {
      json e;
      e["subject"] = ev.subject;
      if (!ev.subject_link.empty()) e["subject_link"] = ev.subject_link;
      e["action"] = ev.action;
      e["object"] = ev.object;
      if (!ev.object_link.empty()) e["object_link"] = ev.object_link;
      e["context"] = ev.context;
      events.push_back(std::move(e));
    }
    obj["events"] = std::move(events);
    json diags = json::array();
    for (const Diagnostic& d : outcome.diagnostics)
      diags.push_back(json{{"severity", d.severity == DiagSeverity::error ? "error" : "warning"},
                           {"code", d.code},
                           {"message", d.message}});
    obj["diagnostics"] = std::move(diags);
    out << obj.dump() << "\n";
    (outcome.status == ExtractionStatus::ok ? ok : discarded) += 1;
  }

  write_summary(opts.out_summary, "extract",
                json{{"articles", articles.size()}, {"ok", ok}, {"discarded", discarded}});
  return 0;
}

// ----------------------------------------------------------------------------
// synth
// ----------------------------------------------------------------------------

int cmd_synth(const SynthOptions& opts) {
  fs::create_directories(opts.out_dir);
  SynthData data = synth_generate(opts.spec);
  write_events_jsonl(opts.out_dir + "/events.jsonl", data.events);
  write_returns_csv(opts.out_dir + "/returns.csv", data.returns);
  write_file(opts.out_dir + "/manifest.json", data.manifest_json);
  write_summary(opts.out_dir + "/synth_summary.json", "synth",
                json{{"observations", data.events.size()}, {"returns", data.returns.size()}});
  return 0;
}

// ----------------------------------------------------------------------------
// build
// ----------------------------------------------------------------------------

namespace {

Date roll_to_weekday(Date d) {
  while (!d.is_weekday()) d = d.plus_days(1);
  return d;
}

}  // namespace

BuiltPanel build_panel(const std::vector<RawObservationRow>& rows, PanelMode mode, int n_max,
                       int days_per_week, const ReturnsPanel* returns) {
  BuiltPanel out;
  out.panel.mode = mode;

  struct Key {
    int32_t period;
    int64_t stock;
    bool operator<(const Key& o) const {
      return period != o.period ? period < o.period : stock < o.stock;
    }
  };

  if (mode == PanelMode::daily) {
    struct Acc {
      std::vector<CanonicalEvent> events;
      std::optional<double> target;
    };
    std::map<Key, Acc> groups;
    for (const RawObservationRow& row : rows) {
      Date day = roll_to_weekday(row.date);
      Acc& acc = groups[Key{day.serial, row.stock_id}];
      for (const EventTriplet& ev : row.events) {
        CanonicalEvent ce;
        ce.subject_token =
            canonicalize_entity(ev.subject, ev.subject_link, out.vocab.entities, &out.vocab.warnings);
        ce.action_token = canonicalize_action(ev.action, out.vocab.actions);
        ce.object_token =
            canonicalize_entity(ev.object, ev.object_link, out.vocab.entities, &out.vocab.warnings);
        acc.events.push_back(ce);
      }
      if (!acc.target && row.target_return) acc.target = row.target_return;
    }
    for (const auto& [key, acc] : groups) {
      Date day{key.period};
      std::optional<double> target = acc.target;
      if (!target && returns) {
        TradingCalendar cal(returns->calendar());
        auto next = cal.shift_after(day, 1);
        if (next) target = returns->ret(*next, key.stock);
      }
      if (!target) {
        out.skipped_rows += 1;
        continue;
      }
      out.panel.observations.push_back(
          build_observation(key.stock, day, acc.events, *target, n_max));
      out.vocab.stocks.intern(key.stock);
    }
  } else {
    if (days_per_week != 5)
      throw std::invalid_argument("weekly build expects days_per_week == 5");
    if (!returns)
      throw std::invalid_argument("weekly build needs a returns panel for Eq-style compounding");
    struct Acc {
      std::vector<std::vector<CanonicalEvent>> day_events =
          std::vector<std::vector<CanonicalEvent>>(5);
    };
    std::map<Key, Acc> groups;
    for (const RawObservationRow& row : rows) {
      Date day = roll_to_weekday(row.date);
      Date week = day.week_start();
      int slot = day.weekday_slot();  // 1..5
      Acc& acc = groups[Key{week.serial, row.stock_id}];
      for (const EventTriplet& ev : row.events) {
        CanonicalEvent ce;
        ce.subject_token =
            canonicalize_entity(ev.subject, ev.subject_link, out.vocab.entities, &out.vocab.warnings);
        ce.action_token = canonicalize_action(ev.action, out.vocab.actions);
        ce.object_token =
            canonicalize_entity(ev.object, ev.object_link, out.vocab.entities, &out.vocab.warnings);
        acc.day_events[static_cast<std::size_t>(slot - 1)].push_back(ce);
      }
    }
    for (const auto& [key, acc] : groups) {
      Date week{key.period};
      // Target: compound the next week's available daily returns.
      std::vector<double> next_week;
      for (int d = 0; d < 5; ++d) {
        auto r = returns->ret(week.plus_days(7 + d), key.stock);
        if (r) next_week.push_back(*r);
      }
      if (next_week.empty()) {
        out.skipped_rows += 1;
        continue;
      }
      FirmPeriodObservation obs;
      obs.stock_id = key.stock;
      obs.period = week;
      obs.target_return = compound_weekly(next_week);
      for (int d = 0; d < 5; ++d)
        obs.days.push_back(build_day_slice(acc.day_events[static_cast<std::size_t>(d)], n_max));
      out.panel.observations.push_back(std::move(obs));
      out.vocab.stocks.intern(key.stock);
    }
  }

  out.panel.finalize();
  return out;
}

int cmd_build(const BuildOptions& opts) {
  fs::create_directories(opts.out_dir);
  std::vector<RawObservationRow> rows = read_events_jsonl(opts.events_path);

  ReturnsPanel returns;
  bool have_returns = !opts.returns_path.empty();
  if (have_returns) returns = to_returns_panel(read_returns_csv(opts.returns_path));

  BuiltPanel built = build_panel(rows, opts.mode, opts.n_max, opts.days_per_week,
                                 have_returns ? &returns : nullptr);

  write_panel_jsonl(opts.out_dir + "/panel.jsonl", built.panel, opts.n_max, opts.days_per_week);
  write_vocab_json(opts.out_dir + "/vocab.json", built.vocab);
  write_summary(opts.out_dir + "/build_summary.json", "build",
                json{{"observations", built.panel.observations.size()},
                     {"periods", built.panel.periods.size()},
                     {"entities", built.vocab.entities.size()},
                     {"actions", built.vocab.actions.size()},
                     {"stocks", built.vocab.stocks.size() - 1},
                     {"skipped_rows", built.skipped_rows},
                     {"warnings", built.vocab.warnings.size()}});
  return 0;
}

// ----------------------------------------------------------------------------
// train
// ----------------------------------------------------------------------------

int cmd_train(const TrainOptions& opts) {
  fs::create_directories(opts.out_dir);
  Panel panel = read_panel_jsonl(opts.panel_path);
  VocabBundle global = read_vocab_json(opts.vocab_path);

  json summary;
  summary["mode"] = panel.mode == PanelMode::weekly ? "weekly" : "daily";

  if (!opts.rolling) {
    VocabBundle window = build_window_vocab(panel, global);
    RemappedPanel remapped = remap_panel(panel, global, window);
    ModelParams params;
    TrainReport report = train(remapped.panel, remapped.stock_indices, opts.cfg,
                               window.entities.size(), window.actions.size(),
                               window.stocks.size(), &params);
    save_checkpoint(opts.out_dir + "/checkpoint.bin", Checkpoint{opts.cfg, window, params});
    summary["windows"] = 1;
    summary["final_mse"] = report.epoch_mse.back();
    summary["epoch_mse"] = report.epoch_mse;
    write_summary(opts.out_dir + "/train_summary.json", "train", summary);
    return 0;
  }

  std::vector<RollingSplit> splits =
      rolling_splits(panel, opts.train_years, opts.test_years, opts.extend_tail);
  std::vector<SignalRow> oos_signal;
  json windows = json::array();
  for (std::size_t i = 0; i < splits.size(); ++i) {
    const RollingSplit& split = splits[i];
    VocabBundle window = build_window_vocab(split.train, global);
    RemappedPanel train_remapped = remap_panel(split.train, global, window);

    ModelConfig cfg = opts.cfg;
    cfg.seed = derive_seed(opts.cfg.seed, "window:" + std::to_string(i));
    ModelParams params;
    TrainReport report =
        train(train_remapped.panel, train_remapped.stock_indices, cfg, window.entities.size(),
              window.actions.size(), window.stocks.size(), &params);

    RemappedPanel test_remapped = remap_panel(split.test, global, window);
    std::vector<double> preds =
        predict_panel(cfg, params, test_remapped.panel, test_remapped.stock_indices);
    for (std::size_t k = 0; k < preds.size(); ++k) {
      const FirmPeriodObservation& obs = test_remapped.panel.observations[k];
      oos_signal.push_back({obs.period, obs.stock_id, preds[k]});
    }

    char name[64];
    std::snprintf(name, sizeof(name), "checkpoint_w%02zu.bin", i);
    save_checkpoint(opts.out_dir + "/" + name, Checkpoint{cfg, window, params});

    windows.push_back(json{{"train_years", {split.train_year_begin, split.train_year_end}},
                           {"test_years", {split.test_year_begin, split.test_year_end}},
                           {"train_obs", split.train.observations.size()},
                           {"test_obs", split.test.observations.size()},
                           {"final_mse", report.epoch_mse.back()}});
  }
  write_signal_csv(opts.out_dir + "/oos_signal.csv", oos_signal);
  summary["windows"] = splits.size();
  summary["per_window"] = std::move(windows);
  write_summary(opts.out_dir + "/train_summary.json", "train", summary);
  return 0;
}

// ----------------------------------------------------------------------------
// predict
// ----------------------------------------------------------------------------

int cmd_predict(const PredictOptions& opts) {
  Checkpoint ckpt = load_checkpoint(opts.checkpoint_path);
  Panel panel = read_panel_jsonl(opts.panel_path);
  VocabBundle global = read_vocab_json(opts.vocab_path);
  RemappedPanel remapped = remap_panel(panel, global, ckpt.vocab);

  std::vector<double> preds =
      predict_panel(ckpt.cfg, ckpt.params, remapped.panel, remapped.stock_indices);
  std::vector<SignalRow> rows;
  rows.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const FirmPeriodObservation& obs = remapped.panel.observations[i];
    rows.push_back({obs.period, obs.stock_id, preds[i]});
  }
  write_signal_csv(opts.out_signal, rows);
  write_summary(opts.out_summary, "predict", json{{"predictions", rows.size()}});
  return 0;
}

// ----------------------------------------------------------------------------
// attribute
// ----------------------------------------------------------------------------

namespace {

std::vector<std::vector<std::string>> aggregate_rows(const std::vector<AggregateImportance>& aggs,
                                                     const VocabBundle& vocab) {
  std::vector<std::vector<std::string>> rows;
  int rank = 1;
  for (const AggregateImportance& a : aggs) {
    rows.push_back({std::to_string(rank++), a.feature.label(vocab),
                    format_double(a.abs_importance), format_double(a.pos_pct),
                    format_double(a.neg_pct), std::to_string(a.freq)});
  }
  return rows;
}

const std::vector<std::string> kImportanceHeader = {"rank",    "feature", "imp_score",
                                                    "pos_pct", "neg_pct", "freq"};

}  // namespace

int cmd_attribute(const AttributeOptions& opts) {
  fs::create_directories(opts.out_dir);
  Checkpoint ckpt = load_checkpoint(opts.checkpoint_path);
  Panel panel = read_panel_jsonl(opts.panel_path);
  VocabBundle global = read_vocab_json(opts.vocab_path);
  RemappedPanel remapped = remap_panel(panel, global, ckpt.vocab);

  auto records_event = attribute_panel(ckpt.cfg, ckpt.params, remapped.panel,
                                       remapped.stock_indices, FeatureLevel::event);
  auto records_entity = attribute_panel(ckpt.cfg, ckpt.params, remapped.panel,
                                        remapped.stock_indices, FeatureLevel::entity);

  auto agg_event = aggregate(records_event, opts.min_freq_event, opts.sum_scores);
  auto agg_entity = aggregate(records_entity, opts.min_freq_entity, opts.sum_scores);

  write_csv(opts.out_dir + "/event_importance.csv", kImportanceHeader,
            aggregate_rows(agg_event, ckpt.vocab));
  write_csv(opts.out_dir + "/entity_importance.csv", kImportanceHeader,
            aggregate_rows(agg_entity, ckpt.vocab));

  PolarityTables pol = polarity_tables(agg_entity, static_cast<std::size_t>(opts.polarity_top_n));
  std::vector<std::string> pol_header = {"side", "feature", "signed_mean", "abs_importance",
                                         "freq"};
  std::vector<std::vector<std::string>> pol_rows;
  for (const AggregateImportance& a : pol.positive)
    pol_rows.push_back({"positive", a.feature.label(ckpt.vocab), format_double(a.signed_mean),
                        format_double(a.abs_importance), std::to_string(a.freq)});
  for (const AggregateImportance& a : pol.negative)
    pol_rows.push_back({"negative", a.feature.label(ckpt.vocab), format_double(a.signed_mean),
                        format_double(a.abs_importance), std::to_string(a.freq)});
  write_csv(opts.out_dir + "/entity_polarity.csv", pol_header, pol_rows);

  write_summary(opts.out_dir + "/attribute_summary.json", "attribute",
                json{{"event_records", records_event.size()},
                     {"entity_records", records_entity.size()},
                     {"event_features", agg_event.size()},
                     {"entity_features", agg_entity.size()}});
  return 0;
}

// ----------------------------------------------------------------------------
// sort
// ----------------------------------------------------------------------------

SignalPanel to_signal_panel(const std::vector<SignalRow>& rows, int periods_per_year) {
  std::map<int32_t, std::vector<const SignalRow*>> by_date;
  for (const SignalRow& r : rows) by_date[r.date.serial].push_back(&r);
  SignalPanel panel;
  panel.periods_per_year = periods_per_year;
  for (const auto& [serial, group] : by_date) {
    SignalCrossSection cs;
    cs.period = Date{serial};
    std::vector<const SignalRow*> sorted = group;
    std::sort(sorted.begin(), sorted.end(),
              [](const SignalRow* a, const SignalRow* b) { return a->stock_id < b->stock_id; });
    for (const SignalRow* r : sorted) {
      cs.stock.push_back(r->stock_id);
      cs.signal.push_back(r->signal);
    }
    panel.periods.push_back(std::move(cs));
  }
  return panel;
}

int cmd_sort(const SortOptions& opts) {
  fs::create_directories(opts.out_dir);
  SignalPanel signals = to_signal_panel(read_signal_csv(opts.signal_path), opts.periods_per_year);
  ReturnsPanel returns = to_returns_panel(read_returns_csv(opts.returns_path));

  json delayed = json::array();
  LongShortSeries base;
  for (int k : opts.delays) {
    LongShortSeries series = delayed_series(signals, returns, k);
    if (k == 1) base = series;
    if (series.ret.size() < 2) {
      delayed.push_back(json{{"k", k}, {"periods", series.ret.size()}});
      continue;
    }
    PerfStats perf = performance(series);
    json entry{{"k", k},
               {"annualized_return", perf.annualized_return},
               {"t_stat", perf.t_stat},
               {"periods", perf.periods}};
    if (perf.sharpe_defined)
      entry["sharpe"] = perf.sharpe;
    else
      entry["sharpe"] = nullptr;
    delayed.push_back(std::move(entry));
  }

  std::vector<std::vector<std::string>> series_rows;
  for (std::size_t i = 0; i < base.dates.size(); ++i)
    series_rows.push_back({base.dates[i].to_string(), format_double(base.ret[i])});
  std::vector<std::string> series_header = {"date", "long_short"};
  write_csv(opts.out_dir + "/long_short.csv", series_header, series_rows);

  std::vector<std::vector<std::string>> delay_rows;
  for (const json& e : delayed) {
    delay_rows.push_back(
        {std::to_string(e["k"].get<int>()),
         e.contains("annualized_return") ? format_double(e["annualized_return"].get<double>()) : "",
         e.contains("t_stat") ? format_double(e["t_stat"].get<double>()) : "",
         e.contains("sharpe") && !e["sharpe"].is_null() ? format_double(e["sharpe"].get<double>())
                                                        : "",
         std::to_string(e["periods"].get<std::size_t>())});
  }
  std::vector<std::string> delay_header = {"k", "annualized_return", "t_stat", "sharpe",
                                           "periods"};
  write_csv(opts.out_dir + "/delayed.csv", delay_header, delay_rows);

  json summary{{"delays", delayed}};
  if (!opts.factors_path.empty() && base.ret.size() >= 7) {
    std::vector<FactorRow> factors = read_factors_csv(opts.factors_path);
    AlphaResult alpha = factor_alpha(base, factors);
    summary["ff5_alpha_annualized"] = alpha.alpha_annualized;
    summary["ff5_alpha_t"] = alpha.t_stat;
    summary["ff5_loadings"] = alpha.loadings;
  }
  write_summary(opts.out_dir + "/sort_summary.json", "sort", summary);
  return 0;
}

// ----------------------------------------------------------------------------
// fmb
// ----------------------------------------------------------------------------

int cmd_fmb(const FmbOptions& opts) {
  fs::create_directories(opts.out_dir);
  std::vector<SignalRow> signal_rows = read_signal_csv(opts.signal_path);
  SignalPanel signals = to_signal_panel(signal_rows, 252);
  ReturnsPanel returns = to_returns_panel(read_returns_csv(opts.returns_path));

  std::vector<FMCrossSection> sections;
  for (const SignalCrossSection& cs : signals.periods) {
    int idx = returns.period_index(cs.period);
    if (idx < 0) continue;
    FMCrossSection sec;
    sec.period = cs.period;
    sec.x.resize(1 + opts.control_windows.size());
    for (std::size_t i = 0; i < cs.stock.size(); ++i) {
      auto y = returns.ret_at(idx + 1, cs.stock[i]);
      if (!y) continue;
      std::vector<double> controls;
      bool complete = true;
      for (int w : opts.control_windows) {
        auto c = returns.trailing_mean(cs.period, cs.stock[i], w);
        if (!c) {
          complete = false;
          break;
        }
        controls.push_back(*c);
      }
      if (!complete) continue;
      sec.y.push_back(*y);
      sec.x[0].push_back(cs.signal[i]);
      for (std::size_t c = 0; c < controls.size(); ++c) sec.x[c + 1].push_back(controls[c]);
    }
    if (!sec.y.empty()) sections.push_back(std::move(sec));
  }

  std::vector<std::string> names = {"signal"};
  for (int w : opts.control_windows) names.push_back("ret_trailing_" + std::to_string(w));

  FMResult result = fama_macbeth(sections, names, opts.standardize, opts.nw_lags);

  std::vector<std::vector<std::string>> rows;
  for (const FMCoef& c : result.coefficients)
    rows.push_back({c.name, format_double(c.mean), format_double(c.se), format_double(c.t_stat),
                    std::to_string(c.periods_used)});
  std::vector<std::string> header = {"coefficient", "mean", "nw_se", "t_stat", "periods"};
  write_csv(opts.out_dir + "/fmb_coefficients.csv", header, rows);

  write_summary(opts.out_dir + "/fmb_summary.json", "fmb",
                json{{"periods", result.periods},
                     {"avg_adj_r2", result.avg_adj_r2},
                     {"warnings", result.warnings.size()}});
  return 0;
}

// ----------------------------------------------------------------------------
// comove
// ----------------------------------------------------------------------------

int cmd_comove(const ComoveOptions& opts) {
  fs::create_directories(opts.out_dir);
  Panel panel = read_panel_jsonl(opts.panel_path);
  VocabBundle global = read_vocab_json(opts.vocab_path);
  ReturnsPanel returns = to_returns_panel(read_returns_csv(opts.returns_path));
  TradingCalendar calendar(returns.calendar());

  // Focal entities from the ranked entity-importance CSV.
  struct Focal {
    int32_t token;
    std::string key;
    double score;
  };
  std::vector<Focal> focal;
  {
    std::istringstream in(read_file(opts.entity_importance_path));
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (first || trim(line).empty()) {
        first = false;
        continue;
      }
      std::vector<std::string> fields;
      std::stringstream ss(line);
      std::string f;
      while (std::getline(ss, f, ',')) fields.push_back(f);
      if (fields.size() < 6) continue;
      const std::string& key = fields[1];
      if (key == "<pad>" || key == "<unk>") continue;
      auto token = global.entities.lookup(key);
      if (!token) continue;
      focal.push_back({*token, key, std::stod(fields[2])});
      if (static_cast<int>(focal.size()) >= opts.focal_entities) break;
    }
  }
  if (focal.empty()) throw std::runtime_error("comove: no focal entities resolved");

  ExposureMatrix exposures = exposure(panel);
  ShockConfig shock_cfg;
  shock_cfg.min_firms = opts.min_firms;
  shock_cfg.shift = opts.shift;
  shock_cfg.min_shocks = opts.min_shocks;

  struct EntityOutcome {
    Focal focal;
    std::vector<ComoveResult> by_tau;
    std::vector<LeaveOneOutRow> loo;
  };
  std::vector<EntityOutcome> outcomes;
  std::vector<std::string> warnings;
  for (const Focal& f : focal) {
    std::vector<int64_t> portfolio = top_k_portfolio(f.token, exposures, opts.top_k, &warnings);
    if (portfolio.size() < 2) continue;
    auto shocks = detect_shocks(f.token, portfolio, panel, calendar, shock_cfg);
    if (!shocks) continue;
    EntityOutcome outcome;
    outcome.focal = f;
    bool usable = true;
    for (int tau : opts.taus) {
      try {
        outcome.by_tau.push_back(delta_rho(returns, portfolio, *shocks, tau));
      } catch (const std::exception&) {
        usable = false;
        break;
      }
    }
    if (!usable || outcome.by_tau.empty()) continue;
    for (const ComoveResult& r : outcome.by_tau) {
      if (r.tau == opts.loo_tau && r.shocks_used >= 2) {
        outcome.loo = leave_one_out(r);
        break;
      }
    }
    outcomes.push_back(std::move(outcome));
  }
  if (outcomes.empty()) throw std::runtime_error("comove: no entity survived shock filtering");

  std::vector<double> scores;
  scores.reserve(outcomes.size());
  for (const EntityOutcome& o : outcomes) scores.push_back(o.focal.score);
  std::vector<int> equal_labels = group_entities(scores, GroupScheme::equal);
  std::vector<int> value_labels =
      group_entities(scores, GroupScheme::value, opts.group_hi, opts.group_lo);

  // Per-entity detail rows.
  std::vector<std::vector<std::string>> entity_rows;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    for (const ComoveResult& r : outcomes[i].by_tau) {
      entity_rows.push_back({outcomes[i].focal.key, std::to_string(r.tau),
                             format_double(r.delta_rho), format_double(r.rho_event),
                             format_double(r.rho_base), format_double(r.p_value),
                             std::to_string(r.shocks_used),
                             std::to_string(equal_labels[i]), std::to_string(value_labels[i])});
    }
  }
  std::vector<std::string> entity_header = {"entity",  "tau",   "delta_rho",   "rho_event",
                                            "rho_base", "p_value", "shocks",    "equal_group",
                                            "value_group"};
  write_csv(opts.out_dir + "/comove_entities.csv", entity_header, entity_rows);

  // Grouped windows table (both schemes).
  const char* group_names[3] = {"High", "Mid", "Low"};
  std::vector<std::vector<std::string>> window_rows;
  for (const char* scheme : {"equal", "value"}) {
    const std::vector<int>& labels =
        std::string(scheme) == "equal" ? equal_labels : value_labels;
    for (int g = 0; g < 3; ++g) {
      for (int tau : opts.taus) {
        double sum = 0.0;
        int n = 0, pos = 0, p05 = 0, p01 = 0;
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
          if (labels[i] != g) continue;
          for (const ComoveResult& r : outcomes[i].by_tau) {
            if (r.tau != tau) continue;
            sum += r.delta_rho;
            ++n;
            if (r.delta_rho > 0) ++pos;
            if (r.p_value < 0.05) ++p05;
            if (r.p_value < 0.01) ++p01;
          }
        }
        if (n == 0) continue;
        window_rows.push_back({scheme, group_names[g], std::to_string(tau), std::to_string(n),
                               format_double(sum / n),
                               format_double(static_cast<double>(pos) / n),
                               format_double(static_cast<double>(p05) / n),
                               format_double(static_cast<double>(p01) / n)});
      }
    }
  }
  std::vector<std::string> window_header = {"scheme",        "group",        "tau",
                                            "entities",      "avg_delta_rho", "pct_mean_pos",
                                            "pct_p_lt_05",   "pct_p_lt_01"};
  write_csv(opts.out_dir + "/comove_windows.csv", window_header, window_rows);

  // Leave-one-out detail.
  std::vector<std::vector<std::string>> loo_rows;
  for (const EntityOutcome& o : outcomes)
    for (const LeaveOneOutRow& row : o.loo)
      loo_rows.push_back({o.focal.key, row.shock.to_string(),
                          format_double(row.post_corr_drop_pct),
                          format_double(row.delta_drop_pct)});
  std::vector<std::string> loo_header = {"entity", "shock_date", "post_corr_drop_pct",
                                         "delta_drop_pct"};
  write_csv(opts.out_dir + "/comove_loo.csv", loo_header, loo_rows);

  write_summary(opts.out_dir + "/comove_summary.json", "comove",
                json{{"focal_candidates", focal.size()},
                     {"entities_analyzed", outcomes.size()},
                     {"warnings", warnings.size()}});
  return 0;
}

// ----------------------------------------------------------------------------
// topics
// ----------------------------------------------------------------------------

int cmd_topics(const TopicsOptions& opts) {
  fs::create_directories(opts.out_dir);
  std::vector<RawObservationRow> raw = read_events_jsonl(opts.events_path);
  Panel panel = read_panel_jsonl(opts.panel_path);
  VocabBundle global = read_vocab_json(opts.vocab_path);
  Checkpoint ckpt = load_checkpoint(opts.checkpoint_path);

  // Unique (period, stock, canonical triplet) -> first context, matching the
  // dedupe the panel builder applied.
  struct OccKey {
    int32_t period;
    int64_t stock;
    CanonicalEvent event;
    bool operator<(const OccKey& o) const {
      if (period != o.period) return period < o.period;
      if (stock != o.stock) return stock < o.stock;
      return event < o.event;
    }
  };
  std::map<OccKey, std::string> occurrence_context;
  for (const RawObservationRow& row : raw) {
    Date day = roll_to_weekday(row.date);
    Date period = panel.mode == PanelMode::weekly ? day.week_start() : day;
    for (const EventTriplet& ev : row.events) {
      auto subj = global.entities.lookup(entity_canonical_key(ev.subject, ev.subject_link));
      auto act = global.actions.lookup(normalize_action(ev.action));
      auto obj = global.entities.lookup(entity_canonical_key(ev.object, ev.object_link));
      if (!subj || !act || !obj) continue;
      OccKey key{period.serial, row.stock_id, CanonicalEvent{*subj, *act, *obj}};
      occurrence_context.emplace(key, ev.context);  // first context wins
    }
  }

  std::vector<std::string> contexts;
  std::vector<OccKey> occ_keys;
  contexts.reserve(occurrence_context.size());
  for (const auto& [key, ctx] : occurrence_context) {
    occ_keys.push_back(key);
    contexts.push_back(ctx);
  }

  Corpus corpus = build_corpus(contexts);
  if (corpus.docs.empty()) throw std::runtime_error("topics: corpus is empty after filtering");
  double alpha = opts.alpha > 0.0 ? opts.alpha : 50.0 / opts.topics;
  TopicModel model = lda_gibbs(corpus, opts.topics, alpha, opts.beta, opts.iterations, opts.seed);

  // Event-level attribution joined with topic assignments.
  RemappedPanel remapped = remap_panel(panel, global, ckpt.vocab);
  auto records = attribute_panel(ckpt.cfg, ckpt.params, remapped.panel, remapped.stock_indices,
                                 FeatureLevel::event);

  // Translate record features back to global token ids for the join.
  std::map<OccKey, double> occurrence_score;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const ImportanceRecord& r = records[i];
    auto subj = global.entities.lookup(ckpt.vocab.entities.key(r.feature.a));
    auto act = global.actions.lookup(ckpt.vocab.actions.key(r.feature.b));
    auto obj = global.entities.lookup(ckpt.vocab.entities.key(r.feature.c));
    if (!subj || !act || !obj) continue;  // UNK features cannot be joined
    occurrence_score[OccKey{r.period.serial, r.stock_id, CanonicalEvent{*subj, *act, *obj}}] =
        r.score;
  }

  std::vector<std::pair<int, double>> scored;
  int unassigned = 0;
  for (std::size_t i = 0; i < occ_keys.size(); ++i) {
    auto score_it = occurrence_score.find(occ_keys[i]);
    if (score_it == occurrence_score.end()) continue;
    int topic = assign_topic(contexts[i], model, corpus);
    if (topic < 0) {
      ++unassigned;
      continue;
    }
    scored.emplace_back(topic, score_it->second);
  }

  std::vector<TopicImportanceRow> table = topic_importance(scored);

  std::vector<std::vector<std::string>> rows;
  for (const TopicImportanceRow& r : table) {
    std::vector<std::string> terms = top_terms(model, corpus, r.topic, opts.top_terms);
    std::string joined;
    for (const std::string& t : terms) {
      if (!joined.empty()) joined += ' ';
      joined += t;
    }
    rows.push_back({std::to_string(r.topic), joined, format_double(r.abs_importance),
                    format_double(r.pos_pct), format_double(r.neg_pct), std::to_string(r.freq)});
  }
  std::vector<std::string> header = {"topic", "top_terms", "imp_score", "pos_pct", "neg_pct",
                                     "freq"};
  write_csv(opts.out_dir + "/topic_importance.csv", header, rows);

  write_summary(opts.out_dir + "/topics_summary.json", "topics",
                json{{"documents", corpus.docs.size()},
                     {"vocab", corpus.vocab.size()},
                     {"topics", opts.topics},
                     {"scored_events", scored.size()},
                     {"unassigned", unassigned}});
  return 0;
}

}  // namespace ser
