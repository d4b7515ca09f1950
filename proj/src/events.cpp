#include "ser/events.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "ser/util.hpp"

namespace ser {

// ----------------------------------------------------------------------------
// Vocabulary
// ----------------------------------------------------------------------------

Vocabulary::Vocabulary() {
  intern("<pad>");
  intern("<unk>");
}

int32_t Vocabulary::intern(const std::string& key) {
  auto it = index_.find(key);
  if (it != index_.end()) {
    counts_[static_cast<std::size_t>(it->second)] += 1;
    return it->second;
  }
  int32_t id = static_cast<int32_t>(keys_.size());
  keys_.push_back(key);
  counts_.push_back(1);
  index_.emplace(key, id);
  return id;
}

std::optional<int32_t> Vocabulary::lookup(const std::string& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void Vocabulary::add_count(int32_t id, int64_t extra) {
  counts_.at(static_cast<std::size_t>(id)) += extra;
}

const std::string& Vocabulary::key(int32_t id) const {
  return keys_.at(static_cast<std::size_t>(id));
}

int64_t Vocabulary::count(int32_t id) const { return counts_.at(static_cast<std::size_t>(id)); }

StockVocab::StockVocab() {
  ids_.push_back(-1);  // UNK slot
}

int32_t StockVocab::intern(int64_t stock_id) {
  auto it = index_.find(stock_id);
  if (it != index_.end()) return it->second;
  int32_t idx = static_cast<int32_t>(ids_.size());
  ids_.push_back(stock_id);
  index_.emplace(stock_id, idx);
  return idx;
}

int32_t StockVocab::lookup(int64_t stock_id) const {
  auto it = index_.find(stock_id);
  return it == index_.end() ? kUnk : it->second;
}

int DaySlice::live_count() const {
  int n = 0;
  for (uint8_t m : mask) n += m ? 1 : 0;
  return n;
}

void Panel::finalize() {
  std::sort(observations.begin(), observations.end(),
            [](const FirmPeriodObservation& a, const FirmPeriodObservation& b) {
              if (a.period != b.period) return a.period < b.period;
              return a.stock_id < b.stock_id;
            });
  for (std::size_t i = 1; i < observations.size(); ++i) {
    if (observations[i].period == observations[i - 1].period &&
        observations[i].stock_id == observations[i - 1].stock_id)
      throw std::invalid_argument("panel: duplicate (period, stock) " +
                                  observations[i].period.to_string() + "/" +
                                  std::to_string(observations[i].stock_id));
  }
  periods.clear();
  for (const auto& o : observations)
    if (periods.empty() || periods.back() != o.period) periods.push_back(o.period);
}

// ----------------------------------------------------------------------------
// Entity canonicalization
// ----------------------------------------------------------------------------

std::string entity_canonical_key(const std::string& surface, const std::string& link,
                                 std::vector<std::string>* warnings) {
  if (!link.empty()) {
    auto seg = url_final_segment(link);
    if (seg.has_value() && !trim(*seg).empty()) return *seg;
    if (warnings)
      warnings->push_back("malformed entity link '" + link + "', using surface form '" + surface +
                          "'");
  }
  return to_lower(collapse_whitespace(surface));
}

int32_t canonicalize_entity(const std::string& surface, const std::string& link, Vocabulary& vocab,
                            std::vector<std::string>* warnings) {
  if (trim(surface).empty()) throw std::invalid_argument("canonicalize_entity: empty surface form");
  return vocab.intern(entity_canonical_key(surface, link, warnings));
}

// ----------------------------------------------------------------------------
// Action normalization: shipped lemmatizer table
// ----------------------------------------------------------------------------

namespace {

// Irregular past/participle forms plus common -e verbs whose suffix-stripped
// stems need the final e restored.
const std::map<std::string, std::string>& irregular_verbs() {
  static const std::map<std::string, std::string> table = {
      {"fell", "fall"},        {"rose", "rise"},        {"said", "say"},
      {"sold", "sell"},        {"bought", "buy"},       {"made", "make"},
      {"took", "take"},        {"went", "go"},          {"paid", "pay"},
      {"won", "win"},          {"lost", "lose"},        {"met", "meet"},
      {"held", "hold"},        {"led", "lead"},         {"left", "leave"},
      {"kept", "keep"},        {"fed", "feed"},         {"sought", "seek"},
      {"brought", "bring"},    {"caught", "catch"},     {"taught", "teach"},
      {"thought", "think"},    {"began", "begin"},      {"begun", "begin"},
      {"broke", "break"},      {"chose", "choose"},     {"came", "come"},
      {"drove", "drive"},      {"gave", "give"},        {"grew", "grow"},
      {"knew", "know"},        {"laid", "lay"},         {"ran", "run"},
      {"saw", "see"},          {"sent", "send"},        {"spent", "spend"},
      {"spoke", "speak"},      {"stood", "stand"},      {"told", "tell"},
      {"wrote", "write"},      {"wound", "wind"},       {"found", "find"},
      {"built", "build"},      {"cut", "cut"},          {"put", "put"},
      {"set", "set"},          {"hit", "hit"},          {"let", "let"},
      {"shut", "shut"},        {"cost", "cost"},        {"beat", "beat"},
      {"forecast", "forecast"}};
  return table;
}

// Stems whose stripped form should end in e: "rais" -> "raise".
const std::set<std::string>& e_restore_stems() {
  static const std::set<std::string> table = {
      "rais",    "declin",  "announc", "increas", "decreas", "acquir", "issu",
      "releas",  "schedul", "clos",    "fil",     "settl",   "merg",   "nam",
      "vot",     "approv",  "argu",    "believ",  "receiv",  "reduc",  "remov",
      "replac",  "sav",     "shar",    "stat",    "trad",    "valu",   "chang",
      "charg",   "compar",  "complet", "continu", "creat",   "decid",  "provid",
      "promis",  "produc",  "pledg",   "not",     "generat", "integr", "estimat"};
  return table;
}

bool ends_with(const std::string& s, const char* suffix) {
  std::string_view sv(suffix);
  return s.size() >= sv.size() && s.compare(s.size() - sv.size(), sv.size(), sv) == 0;
}

bool doubled_final_consonant(const std::string& s) {
  if (s.size() < 3) return false;
  char a = s[s.size() - 1], b = s[s.size() - 2];
  if (a != b) return false;
  static const std::string keep = "lsz";  // call, pass, buzz keep their doubles
  return keep.find(a) == std::string::npos && std::string("aeiou").find(a) == std::string::npos;
}

std::string finish_stem(std::string stem) {
  if (doubled_final_consonant(stem)) stem.pop_back();
  if (e_restore_stems().count(stem)) stem.push_back('e');
  return stem;
}

std::string lemmatize_token(const std::string& token) {
  if (token.size() < 3) return token;
  auto irr = irregular_verbs().find(token);
  if (irr != irregular_verbs().end()) return irr->second;

  if (ends_with(token, "ies") && token.size() > 4)
    return token.substr(0, token.size() - 3) + "y";
  if (ends_with(token, "ied") && token.size() > 4)
    return token.substr(0, token.size() - 3) + "y";
  if (ends_with(token, "sses")) return token.substr(0, token.size() - 2);
  if (ends_with(token, "ing") && token.size() > 5)
    return finish_stem(token.substr(0, token.size() - 3));
  if (ends_with(token, "ed") && token.size() > 4)
    return finish_stem(token.substr(0, token.size() - 2));
  if (ends_with(token, "es") &&
      (ends_with(token.substr(0, token.size() - 2), "x") ||
       ends_with(token.substr(0, token.size() - 2), "s") ||
       ends_with(token.substr(0, token.size() - 2), "z") ||
       ends_with(token.substr(0, token.size() - 2), "ch") ||
       ends_with(token.substr(0, token.size() - 2), "sh")))
    return token.substr(0, token.size() - 2);
  if (ends_with(token, "s") && !ends_with(token, "ss") && !ends_with(token, "us") &&
      token.size() > 3)
    return token.substr(0, token.size() - 1);
  return token;
}

}  // namespace

std::string normalize_action(const std::string& raw) {
  if (trim(raw).empty()) throw std::invalid_argument("normalize_action: empty action");
  std::vector<std::string> tokens = tokenize(raw);
  std::string out;
  for (const std::string& tok : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += lemmatize_token(tok);
  }
  // Worst case (pure punctuation) falls back to the cleaned surface form.
  if (out.empty()) out = to_lower(collapse_whitespace(raw));
  return out;
}

int32_t canonicalize_action(const std::string& raw, Vocabulary& vocab) {
  return vocab.intern(normalize_action(raw));
}

// ----------------------------------------------------------------------------
// Deduplication
// ----------------------------------------------------------------------------

std::vector<CanonicalEvent> dedupe_events(std::span<const CanonicalEvent> events) {
  std::vector<CanonicalEvent> out;
  std::set<CanonicalEvent> seen;
  for (const CanonicalEvent& e : events) {
    if (seen.insert(e).second) out.push_back(e);
  }
  return out;
}

double tf_cosine(const std::unordered_map<std::string, int>& a,
                 const std::unordered_map<std::string, int>& b) {
  if (a.empty() || b.empty()) return 0.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [tok, cnt] : a) {
    na += static_cast<double>(cnt) * cnt;
    auto it = b.find(tok);
    if (it != b.end()) dot += static_cast<double>(cnt) * it->second;
  }
  for (const auto& [tok, cnt] : b) nb += static_cast<double>(cnt) * cnt;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<std::size_t> dedupe_articles(const std::vector<std::vector<std::string>>& article_tokens,
                                         double threshold) {
  if (threshold <= 0.0 || threshold > 1.0)
    throw std::invalid_argument("dedupe_articles: threshold must be in (0, 1]");
  std::vector<std::unordered_map<std::string, int>> tf;
  tf.reserve(article_tokens.size());
  for (const auto& toks : article_tokens) {
    std::unordered_map<std::string, int> m;
    for (const std::string& t : toks) ++m[t];
    tf.push_back(std::move(m));
  }
  std::vector<std::size_t> kept;
  for (std::size_t j = 0; j < tf.size(); ++j) {
    bool dup = false;
    for (std::size_t k : kept) {
      if (tf_cosine(tf[j], tf[k]) > threshold) {
        dup = true;
        break;
      }
    }
    if (!dup) kept.push_back(j);
  }
  return kept;
}

// ----------------------------------------------------------------------------
// Weekly compounding
// ----------------------------------------------------------------------------

double compound_weekly(std::span<const double> daily_returns) {
  if (daily_returns.empty() || daily_returns.size() > 5)
    throw std::invalid_argument("compound_weekly: need 1..5 daily returns, got " +
                                std::to_string(daily_returns.size()));
  double log_sum = 0.0;
  for (double r : daily_returns) {
    if (r <= -1.0)
      throw std::domain_error("compound_weekly: return " + format_double(r) + " <= -1");
    log_sum += std::log1p(r);
  }
  return std::expm1(log_sum);
}

// ----------------------------------------------------------------------------
// Observation assembly
// ----------------------------------------------------------------------------

DaySlice build_day_slice(std::span<const CanonicalEvent> events, int n_max) {
  if (n_max < 1) throw std::invalid_argument("build_day_slice: n_max must be >= 1");
  std::vector<CanonicalEvent> unique = dedupe_events(events);
  if (static_cast<int>(unique.size()) > n_max) unique.resize(static_cast<std::size_t>(n_max));

  DaySlice slice;
  slice.subject.assign(static_cast<std::size_t>(n_max), Vocabulary::kPad);
  slice.action.assign(static_cast<std::size_t>(n_max), Vocabulary::kPad);
  slice.object.assign(static_cast<std::size_t>(n_max), Vocabulary::kPad);
  slice.mask.assign(static_cast<std::size_t>(n_max), 0);
  for (std::size_t i = 0; i < unique.size(); ++i) {
    slice.subject[i] = unique[i].subject_token;
    slice.action[i] = unique[i].action_token;
    slice.object[i] = unique[i].object_token;
    slice.mask[i] = 1;
  }
  return slice;
}

FirmPeriodObservation build_observation(int64_t stock_id, Date period,
                                        std::span<const CanonicalEvent> raw_events, double target,
                                        int n_max) {
  if (target <= -1.0)
    throw std::invalid_argument("build_observation: target return must exceed -1");
  FirmPeriodObservation obs;
  obs.stock_id = stock_id;
  obs.period = period;
  obs.target_return = target;
  obs.days.push_back(build_day_slice(raw_events, n_max));
  return obs;
}

// ----------------------------------------------------------------------------
// Rolling splits
// ----------------------------------------------------------------------------

std::vector<RollingSplit> rolling_splits(const Panel& panel, int train_years, int test_years,
                                         bool extend_tail) {
  if (train_years < 1 || test_years < 1)
    throw std::invalid_argument("rolling_splits: window lengths must be >= 1");
  if (panel.periods.empty()) throw std::invalid_argument("rolling_splits: empty panel");

  int first_year = panel.periods.front().year();
  int last_year = panel.periods.back().year();
  int span = last_year - first_year + 1;
  if (span < train_years + test_years)
    throw std::invalid_argument("rolling_splits: panel spans " + std::to_string(span) +
                                " years, need >= " + std::to_string(train_years + test_years));

  int n_splits = (span - train_years - test_years) / test_years + 1;

  // With extend_tail the final third of the windows anchors its train start.
  int tail_first = n_splits;  // index of the first anchored window
  if (extend_tail && n_splits >= 3) tail_first = n_splits - n_splits / 3;

  std::vector<RollingSplit> splits;
  splits.reserve(static_cast<std::size_t>(n_splits));
  for (int i = 0; i < n_splits; ++i) {
    RollingSplit s;
    int train_begin = first_year + i * test_years;
    if (extend_tail && i >= tail_first) train_begin = first_year + tail_first * test_years;
    s.train_year_begin = train_begin;
    s.train_year_end = first_year + i * test_years + train_years - 1;
    s.test_year_begin = s.train_year_end + 1;
    s.test_year_end = s.test_year_begin + test_years - 1;
    s.train.mode = panel.mode;
    s.test.mode = panel.mode;
    for (const FirmPeriodObservation& o : panel.observations) {
      int y = o.period.year();
      if (y >= s.train_year_begin && y <= s.train_year_end)
        s.train.observations.push_back(o);
      else if (y >= s.test_year_begin && y <= s.test_year_end)
        s.test.observations.push_back(o);
    }
    s.train.finalize();
    s.test.finalize();
    splits.push_back(std::move(s));
  }
  return splits;
}

}  // namespace ser
