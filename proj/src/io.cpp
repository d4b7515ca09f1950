#include "ser/io.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "ser/util.hpp"

namespace ser {

using nlohmann::json;

namespace {

json event_to_json(const EventTriplet& ev) {
  json obj;
  obj["subject"] = ev.subject;
  if (!ev.subject_link.empty()) obj["subject_link"] = ev.subject_link;
  obj["action"] = ev.action;
  obj["object"] = ev.object;
  if (!ev.object_link.empty()) obj["object_link"] = ev.object_link;
  obj["context"] = ev.context;
  return obj;
}

EventTriplet event_from_json(const json& obj) {
  EventTriplet ev;
  ev.subject = obj.value("subject", "");
  ev.subject_link = obj.value("subject_link", "");
  ev.action = obj.value("action", "");
  ev.object = obj.value("object", "");
  ev.object_link = obj.value("object_link", "");
  ev.context = obj.value("context", "");
  return ev;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) lines.push_back(line);
  }
  return lines;
}

std::vector<std::vector<std::string>> read_csv_rows(const std::string& path,
                                                    std::size_t min_cols) {
  std::vector<std::vector<std::string>> rows;
  bool first = true;
  for (const std::string& line : read_lines(path)) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (first) {
      first = false;  // header
      continue;
    }
    if (fields.size() < min_cols)
      throw std::runtime_error("csv row with " + std::to_string(fields.size()) +
                               " fields in " + path);
    rows.push_back(std::move(fields));
  }
  return rows;
}

}  // namespace

std::vector<RawObservationRow> read_events_jsonl(const std::string& path) {
  std::vector<RawObservationRow> rows;
  for (const std::string& line : read_lines(path)) {
    json obj = json::parse(line);
    RawObservationRow row;
    row.stock_id = obj.at("stock_id").get<int64_t>();
    row.date = Date::parse(obj.at("date").get<std::string>());
    for (const json& ev : obj.value("events", json::array()))
      row.events.push_back(event_from_json(ev));
    if (obj.contains("target_return") && !obj["target_return"].is_null())
      row.target_return = obj["target_return"].get<double>();
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_events_jsonl(const std::string& path, std::span<const RawObservationRow> rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (const RawObservationRow& row : rows) {
    json obj;
    obj["stock_id"] = row.stock_id;
    obj["date"] = row.date.to_string();
    json events = json::array();
    for (const EventTriplet& ev : row.events) events.push_back(event_to_json(ev));
    obj["events"] = std::move(events);
    if (row.target_return) obj["target_return"] = *row.target_return;
    out << obj.dump() << "\n";
  }
}

std::vector<ReturnRow> read_returns_csv(const std::string& path) {
  std::vector<ReturnRow> rows;
  for (const auto& fields : read_csv_rows(path, 3)) {
    ReturnRow row;
    row.date = Date::parse(fields[0]);
    row.stock_id = std::stoll(fields[1]);
    row.ret = std::stod(fields[2]);
    rows.push_back(row);
  }
  return rows;
}

void write_returns_csv(const std::string& path, std::span<const ReturnRow> rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << "date,stock_id,ret\n";
  for (const ReturnRow& r : rows)
    out << r.date.to_string() << "," << r.stock_id << "," << format_double(r.ret) << "\n";
}

ReturnsPanel to_returns_panel(std::span<const ReturnRow> rows) {
  ReturnsPanel panel;
  for (const ReturnRow& r : rows) panel.add(r.date, r.stock_id, r.ret);
  panel.finalize();
  return panel;
}

std::vector<FactorRow> read_factors_csv(const std::string& path) {
  std::vector<FactorRow> rows;
  for (const auto& fields : read_csv_rows(path, 7)) {
    FactorRow row;
    row.date = Date::parse(fields[0]);
    row.mktrf = std::stod(fields[1]);
    row.smb = std::stod(fields[2]);
    row.hml = std::stod(fields[3]);
    row.rmw = std::stod(fields[4]);
    row.cma = std::stod(fields[5]);
    row.rf = std::stod(fields[6]);
    rows.push_back(row);
  }
  return rows;
}

void write_factors_csv(const std::string& path, std::span<const FactorRow> rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << "date,mktrf,smb,hml,rmw,cma,rf\n";
  for (const FactorRow& r : rows) {
    out << r.date.to_string() << "," << format_double(r.mktrf) << "," << format_double(r.smb)
        << "," << format_double(r.hml) << "," << format_double(r.rmw) << ","
        << format_double(r.cma) << "," << format_double(r.rf) << "\n";
  }
}

std::vector<SignalRow> read_signal_csv(const std::string& path) {
  std::vector<SignalRow> rows;
  for (const auto& fields : read_csv_rows(path, 3)) {
    SignalRow row;
    row.date = Date::parse(fields[0]);
    row.stock_id = std::stoll(fields[1]);
    row.signal = std::stod(fields[2]);
    rows.push_back(row);
  }
  return rows;
}

void write_signal_csv(const std::string& path, std::span<const SignalRow> rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << "date,stock_id,signal\n";
  for (const SignalRow& r : rows)
    out << r.date.to_string() << "," << r.stock_id << "," << format_double(r.signal) << "\n";
}

void write_panel_jsonl(const std::string& path, const Panel& panel, int n_max,
                       int days_per_week) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  json header;
  header["mode"] = panel.mode == PanelMode::weekly ? "weekly" : "daily";
  header["n_max"] = n_max;
  header["days_per_week"] = days_per_week;
  out << header.dump() << "\n";

  for (const FirmPeriodObservation& obs : panel.observations) {
    json obj;
    obj["stock_id"] = obs.stock_id;
    obj["date"] = obs.period.to_string();
    obj["target"] = obs.target_return;
    json days = json::array();
    for (const DaySlice& slice : obs.days) {
      json events = json::array();
      for (int i = 0; i < slice.n_max(); ++i) {
        if (!slice.mask[static_cast<std::size_t>(i)]) continue;
        events.push_back(json::array({slice.subject[static_cast<std::size_t>(i)],
                                      slice.action[static_cast<std::size_t>(i)],
                                      slice.object[static_cast<std::size_t>(i)]}));
      }
      days.push_back(std::move(events));
    }
    obj["days"] = std::move(days);
    out << obj.dump() << "\n";
  }
}

Panel read_panel_jsonl(const std::string& path, int* n_max_out, int* days_per_week_out) {
  std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw std::runtime_error("panel file is empty: " + path);
  json header = json::parse(lines[0]);
  int n_max = header.at("n_max").get<int>();
  int dpw = header.at("days_per_week").get<int>();
  if (n_max_out) *n_max_out = n_max;
  if (days_per_week_out) *days_per_week_out = dpw;

  Panel panel;
  panel.mode = header.at("mode").get<std::string>() == "weekly" ? PanelMode::weekly
                                                                : PanelMode::daily;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    json obj = json::parse(lines[i]);
    FirmPeriodObservation obs;
    obs.stock_id = obj.at("stock_id").get<int64_t>();
    obs.period = Date::parse(obj.at("date").get<std::string>());
    obs.target_return = obj.at("target").get<double>();
    for (const json& day : obj.at("days")) {
      std::vector<CanonicalEvent> events;
      for (const json& ev : day)
        events.push_back({ev.at(0).get<int32_t>(), ev.at(1).get<int32_t>(),
                          ev.at(2).get<int32_t>()});
      obs.days.push_back(build_day_slice(events, n_max));
    }
    panel.observations.push_back(std::move(obs));
  }
  panel.finalize();
  return panel;
}

void write_vocab_json(const std::string& path, const VocabBundle& vocab) {
  json obj;
  auto dump_vocab = [](const Vocabulary& v) {
    json arr = json::array();
    for (int32_t id = 0; id < v.size(); ++id)
      arr.push_back(json::array({v.key(id), v.count(id)}));
    return arr;
  };
  obj["entities"] = dump_vocab(vocab.entities);
  obj["actions"] = dump_vocab(vocab.actions);
  json stocks = json::array();
  for (int32_t i = 1; i < vocab.stocks.size(); ++i) stocks.push_back(vocab.stocks.external(i));
  obj["stocks"] = std::move(stocks);
  obj["warnings"] = vocab.warnings;
  write_file(path, obj.dump(2) + "\n");
}

VocabBundle read_vocab_json(const std::string& path) {
  json obj = json::parse(read_file(path));
  VocabBundle vocab;
  auto load_vocab = [](const json& arr, Vocabulary& v) {
    int32_t id = 0;
    for (const json& entry : arr) {
      std::string key = entry.at(0).get<std::string>();
      int64_t count = entry.at(1).get<int64_t>();
      int32_t got = (id < 2) ? id : v.intern(key);
      v.add_count(got, count - 1);
      ++id;
    }
  };
  load_vocab(obj.at("entities"), vocab.entities);
  load_vocab(obj.at("actions"), vocab.actions);
  for (const json& sid : obj.at("stocks")) vocab.stocks.intern(sid.get<int64_t>());
  for (const json& w : obj.value("warnings", json::array()))
    vocab.warnings.push_back(w.get<std::string>());
  return vocab;
}

void write_csv(const std::string& path, std::span<const std::string> header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
}

void write_summary(const std::string& path, const std::string& command, nlohmann::json payload) {
  json obj;
  obj["command"] = command;
  obj["payload"] = std::move(payload);
  auto now = std::chrono::system_clock::now();
  obj["meta"] = {
      {"written_unix_ms",
       std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count()}};
  write_file(path, obj.dump(2) + "\n");
}

}  // namespace ser
