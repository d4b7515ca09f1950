#include "ser/extraction.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

#include "json.hpp"
#include "ser/util.hpp"

#define CPPHTTPLIB_NO_EXCEPTIONS
#include "httplib.h"

namespace ser {

using nlohmann::json;

namespace {

constexpr const char* kSystemTemplate =
    "You are an expert agent specialized in analyzing news texts. Your task is to identify the "
    "most salient events from a given news text as requested by the user prompt. You must "
    "generate the output in a JSON format containing a list with JSON objects having the "
    "following keys: \"subject\", \"subject_link\", \"action\", \"object\", \"object_link\" and "
    "\"context\".\n"
    "\n"
    "- The \"subject\" key must contain the text of the extracted subject entity.\n"
    "- The \"subject_link\" key must contain the DBpedia link for the subject entity.\n"
    "- The \"action\" key must contain the verb or action that connects the subject to the "
    "object.\n"
    "- The \"object\" key must represent the text of the entity which is the object of the "
    "action.\n"
    "- The \"object_link\" key must contain the DBpedia link for the object entity.\n"
    "- The \"context\" key must contain additional context or information about the event.\n"
    "\n"
    "Ensure that both the subject and object are named entities present in DBpedia, and that "
    "both the subject and object are nouns. Extract only the most salient events from the news "
    "text.";

}  // namespace

PromptBundle render_prompt(const std::string& article, const std::string& date,
                           std::span<const FewShotExample> examples) {
  if (trim(article).empty()) throw std::invalid_argument("render_prompt: empty article");

  PromptBundle bundle;
  bundle.system_text = kSystemTemplate;
  bundle.article = article;
  bundle.date = date;
  bundle.few_shot_examples.assign(examples.begin(), examples.end());

  std::string user;
  if (!examples.empty()) {
    user += "Based on the following example, extract salient events from the provided text.\n\n";
    for (const FewShotExample& ex : examples) {
      user += "INPUT: " + ex.article + "\n\nOUTPUT:\n" + ex.expected_json + "\n\n";
    }
    user += "For the following specification, extract salient events as in the provided "
            "example.\n\n";
  } else {
    user += "For the following specification, extract salient events.\n\n";
  }
  user += date + ", " + article;
  bundle.user_text = std::move(user);
  return bundle;
}

// ----------------------------------------------------------------------------
// Parsing
// ----------------------------------------------------------------------------

namespace {

// Strips an optional ``` / ```json fence; returns the inner payload.
std::string strip_code_fence(const std::string& raw) {
  std::string s = trim(raw);
  std::size_t open = s.find("```");
  if (open == std::string::npos) return s;
  std::size_t body = s.find('\n', open);
  if (body == std::string::npos) return s;
  std::size_t close = s.find("```", body);
  if (close == std::string::npos) return trim(s.substr(body + 1));
  return trim(s.substr(body + 1, close - body - 1));
}

// Removes commas that directly precede } or ] so LLM-style trailing commas
// parse. String contents are respected.
std::string strip_trailing_commas(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  bool in_string = false;
  bool escaped = false;
  for (char c : s) {
    if (in_string) {
      out.push_back(c);
      if (escaped)
        escaped = false;
      else if (c == '\\')
        escaped = true;
      else if (c == '"')
        in_string = false;
      continue;
    }
    if (c == '"') {
      in_string = true;
      out.push_back(c);
      continue;
    }
    if (c == '}' || c == ']') {
      std::size_t i = out.size();
      while (i > 0 && std::isspace(static_cast<unsigned char>(out[i - 1]))) --i;
      if (i > 0 && out[i - 1] == ',') out.erase(i - 1, 1);
    }
    out.push_back(c);
  }
  return out;
}

std::string get_string_field(const json& obj, const char* key) {
  if (!obj.contains(key) || !obj[key].is_string()) return "";
  return obj[key].get<std::string>();
}

}  // namespace

std::vector<EventTriplet> parse_events(const std::string& raw_completion) {
  std::string payload = strip_code_fence(raw_completion);
  json parsed = json::parse(payload, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) {
    parsed = json::parse(strip_trailing_commas(payload), nullptr, false);
    if (parsed.is_discarded()) throw ParseError("completion is not valid JSON");
  }
  if (!parsed.is_array()) throw ParseError("completion JSON is not an array");

  std::vector<EventTriplet> events;
  events.reserve(parsed.size());
  int index = 0;
  for (const json& item : parsed) {
    if (!item.is_object()) throw ParseError("event " + std::to_string(index) + " is not an object");
    EventTriplet ev;
    ev.subject = get_string_field(item, "subject");
    ev.action = get_string_field(item, "action");
    ev.object = get_string_field(item, "object");
    ev.context = get_string_field(item, "context");
    ev.subject_link = get_string_field(item, "subject_link");
    ev.object_link = get_string_field(item, "object_link");
    for (const char* key : {"subject", "action", "object", "context"}) {
      if (trim(get_string_field(item, key)).empty()) throw SchemaError(index, key);
    }
    events.push_back(std::move(ev));
    ++index;
  }
  return events;
}

std::string serialize_events(std::span<const EventTriplet> events) {
  json arr = json::array();
  for (const EventTriplet& ev : events) {
    json obj;
    obj["subject"] = ev.subject;
    if (!ev.subject_link.empty()) obj["subject_link"] = ev.subject_link;
    obj["action"] = ev.action;
    obj["object"] = ev.object;
    if (!ev.object_link.empty()) obj["object_link"] = ev.object_link;
    obj["context"] = ev.context;
    arr.push_back(std::move(obj));
  }
  return arr.dump(2);
}

// ----------------------------------------------------------------------------
// Validation
// ----------------------------------------------------------------------------

std::vector<Diagnostic> validate_events(std::span<const EventTriplet> events,
                                        const std::string& article,
                                        const ValidationLimits& limits) {
  std::vector<Diagnostic> diags;
  std::set<std::string> article_tokens;
  for (const std::string& t : tokenize(article)) article_tokens.insert(t);

  int idx = 0;
  for (const EventTriplet& ev : events) {
    const std::string tag = "event " + std::to_string(idx);
    if (trim(ev.subject).empty())
      diags.push_back({DiagSeverity::error, "empty-subject", tag + ": blank subject"});
    if (trim(ev.action).empty())
      diags.push_back({DiagSeverity::error, "empty-action", tag + ": blank action"});
    if (trim(ev.object).empty())
      diags.push_back({DiagSeverity::error, "empty-object", tag + ": blank object"});
    std::string ctx = trim(ev.context);
    if (ctx.size() < limits.min_context_chars)
      diags.push_back({DiagSeverity::error, "context-too-short", tag + ": context below bound"});
    else if (ctx.size() > limits.max_context_chars)
      diags.push_back({DiagSeverity::error, "context-too-long", tag + ": context above bound"});
    if (!ev.subject_link.empty() && !is_valid_url(ev.subject_link))
      diags.push_back(
          {DiagSeverity::error, "bad-subject-link", tag + ": invalid URL '" + ev.subject_link + "'"});
    if (!ev.object_link.empty() && !is_valid_url(ev.object_link))
      diags.push_back(
          {DiagSeverity::error, "bad-object-link", tag + ": invalid URL '" + ev.object_link + "'"});

    if (!ctx.empty() && !article_tokens.empty()) {
      int overlap = 0;
      for (const std::string& t : tokenize(ctx))
        if (article_tokens.count(t)) ++overlap;
      if (overlap == 0)
        diags.push_back({DiagSeverity::warning, "context-mismatch",
                         tag + ": context shares no tokens with the article"});
    }
    ++idx;
  }
  return diags;
}

bool has_errors(std::span<const Diagnostic> diags) {
  return std::any_of(diags.begin(), diags.end(),
                     [](const Diagnostic& d) { return d.severity == DiagSeverity::error; });
}

// ----------------------------------------------------------------------------
// Retry loop
// ----------------------------------------------------------------------------

ExtractionOutcome extract_with_retry(const std::string& article, const std::string& date,
                                     const Provider& provider, int max_attempts,
                                     std::span<const FewShotExample> examples,
                                     const ValidationLimits& limits) {
  if (max_attempts < 1) throw std::invalid_argument("extract_with_retry: max_attempts must be >= 1");

  ExtractionOutcome outcome;
  PromptBundle bundle = render_prompt(article, date, examples);
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    outcome.attempts = attempt;
    std::string completion;
    try {
      completion = provider(bundle);
    } catch (const std::exception& e) {
      outcome.diagnostics.push_back(
          {DiagSeverity::error, "transport", std::string("provider call failed: ") + e.what()});
      continue;
    }
    std::vector<EventTriplet> events;
    try {
      events = parse_events(completion);
    } catch (const std::exception& e) {
      outcome.diagnostics.push_back({DiagSeverity::error, "parse", e.what()});
      continue;
    }
    std::vector<Diagnostic> diags = validate_events(events, article, limits);
    if (has_errors(diags)) {
      for (Diagnostic& d : diags) outcome.diagnostics.push_back(std::move(d));
      continue;
    }
    // Warnings are kept but do not fail the attempt.
    for (Diagnostic& d : diags) outcome.diagnostics.push_back(std::move(d));
    outcome.status = ExtractionStatus::ok;
    outcome.events = std::move(events);
    return outcome;
  }
  outcome.status = ExtractionStatus::discarded;
  outcome.events.clear();
  return outcome;
}

// ----------------------------------------------------------------------------
// Providers
// ----------------------------------------------------------------------------

HttpChatProvider::HttpChatProvider(std::string base_url, std::string path, std::string model,
                                   double temperature)
    : base_url_(std::move(base_url)),
      path_(std::move(path)),
      model_(std::move(model)),
      temperature_(temperature) {}

std::string HttpChatProvider::operator()(const PromptBundle& bundle) const {
  json body;
  body["model"] = model_;
  body["messages"] = json::array({json{{"role", "system"}, {"content", bundle.system_text}},
                                  json{{"role", "user"}, {"content", bundle.user_text}}});
  body["temperature"] = temperature_;

  httplib::Client client(base_url_);
  client.set_read_timeout(120, 0);
  httplib::Headers headers;
  if (const char* key = std::getenv("SER_API_KEY"))
    headers.emplace("Authorization", std::string("Bearer ") + key);

  auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) throw std::runtime_error("chat endpoint unreachable: " + base_url_ + path_);
  if (res->status != 200)
    throw std::runtime_error("chat endpoint returned status " + std::to_string(res->status));

  json reply = json::parse(res->body, nullptr, false);
  if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty())
    throw std::runtime_error("chat endpoint returned malformed body");
  return reply["choices"][0]["message"]["content"].get<std::string>();
}

ReplayProvider::ReplayProvider(const std::string& fixture_path) {
  *this = from_json(read_file(fixture_path));
}

ReplayProvider ReplayProvider::from_json(const std::string& json_text) {
  json parsed = json::parse(json_text);
  ReplayProvider provider;
  for (auto it = parsed.begin(); it != parsed.end(); ++it)
    provider.completions_[it.key()] = it.value().get<std::string>();
  return provider;
}

std::string ReplayProvider::operator()(const PromptBundle& bundle) const {
  std::string digest = sha256_hex(bundle.article);
  auto it = completions_.find(digest);
  if (it == completions_.end())
    throw std::runtime_error("replay fixture has no completion for article sha256 " + digest);
  return it->second;
}

}  // namespace ser
