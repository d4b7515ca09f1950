// Prompt rendering, chat-completion providers and event-output validation.
#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ser/events.hpp"

namespace ser {

struct FewShotExample {
  std::string article;
  std::string expected_json;
};

struct PromptBundle {
  std::string system_text;
  std::string user_text;
  std::vector<FewShotExample> few_shot_examples;
  // Raw inputs kept alongside the rendered text; replay providers key on the
  // article hash.
  std::string article;
  std::string date;
};

// Deterministic rendering of the extraction prompt. With an empty example
// list the examples block is omitted entirely.
PromptBundle render_prompt(const std::string& article, const std::string& date,
                           std::span<const FewShotExample> examples);

struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

struct SchemaError : std::runtime_error {
  int index;
  std::string key;
  SchemaError(int idx, std::string k)
      : std::runtime_error("event " + std::to_string(idx) + ": missing or empty key '" + k + "'"),
        index(idx),
        key(std::move(k)) {}
};

// Parses a completion into events. Accepts a JSON array of objects, tolerates
// a fenced ``` code block wrapper and trailing commas. Throws ParseError on
// non-JSON input and SchemaError when a required key is missing or empty.
std::vector<EventTriplet> parse_events(const std::string& raw_completion);

std::string serialize_events(std::span<const EventTriplet> events);

enum class DiagSeverity { error, warning };

struct Diagnostic {
  DiagSeverity severity = DiagSeverity::error;
  std::string code;
  std::string message;
};

struct ValidationLimits {
  std::size_t min_context_chars = 1;
  std::size_t max_context_chars = 2000;
};

// Structural checks only: triplet completeness, non-empty fields, context
// length bounds, link syntax, plus a non-fatal context/article token-overlap
// warning. Empty result means pass.
std::vector<Diagnostic> validate_events(std::span<const EventTriplet> events,
                                        const std::string& article,
                                        const ValidationLimits& limits = {});

bool has_errors(std::span<const Diagnostic> diags);

// Maps a rendered prompt to raw completion text; throws on transport failure.
using Provider = std::function<std::string(const PromptBundle&)>;

enum class ExtractionStatus { ok, discarded };

struct ExtractionOutcome {
  ExtractionStatus status = ExtractionStatus::discarded;
  std::vector<EventTriplet> events;
  int attempts = 0;
  std::vector<Diagnostic> diagnostics;
};

// render -> call -> parse -> validate loop; re-prompts until a pass or until
// max_attempts is exhausted. Transport failures count as failed attempts.
ExtractionOutcome extract_with_retry(const std::string& article, const std::string& date,
                                     const Provider& provider, int max_attempts,
                                     std::span<const FewShotExample> examples = {},
                                     const ValidationLimits& limits = {});

// HTTP chat-completion client. POSTs {model, messages, temperature} to the
// configured URL with a bearer token from SER_API_KEY and reads
// choices[0].message.content.
class HttpChatProvider {
 public:
  HttpChatProvider(std::string base_url, std::string path, std::string model,
                   double temperature = 0.0);
  std::string operator()(const PromptBundle& bundle) const;

 private:
  std::string base_url_;
  std::string path_;
  std::string model_;
  double temperature_;
};

// Replays stored completions keyed by sha256(article). Fixture file is a JSON
// object { "<hex digest>": "<completion text>", ... }.
class ReplayProvider {
 public:
  explicit ReplayProvider(const std::string& fixture_path);
  static ReplayProvider from_json(const std::string& json_text);
  std::string operator()(const PromptBundle& bundle) const;

 private:
  ReplayProvider() = default;
  std::unordered_map<std::string, std::string> completions_;
};

}  // namespace ser
