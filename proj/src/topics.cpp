#include "ser/topics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "ser/rng.hpp"
#include "ser/util.hpp"

namespace ser {

namespace {

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> words = {
      "the",   "and",   "for",   "are",   "but",  "not",   "you",   "all",   "any",   "can",
      "had",   "her",   "was",   "one",   "our",  "out",   "day",   "get",   "has",   "him",
      "his",   "how",   "man",   "new",   "now",  "old",   "see",   "two",   "way",   "who",
      "its",   "did",   "that",  "this",  "with", "from",  "have",  "been",  "were",  "your",
      "said",  "they",  "their", "them",  "then", "than",  "there", "these", "those", "will",
      "would", "could", "should","about", "after","before","which", "while", "where", "when",
      "what",  "into",  "over",  "under", "such", "some",  "more",  "most",  "much",  "many",
      "also",  "other", "only",  "between", "during", "because", "through", "against", "being",
      "both",  "each",  "down",  "just",  "like", "made",  "make",  "even",  "still", "very"};
  return words;
}

}  // namespace

Corpus build_corpus(std::span<const std::string> contexts, const CorpusOptions& opts) {
  // First pass: token frequencies.
  std::unordered_map<std::string, int> freq;
  std::vector<std::vector<std::string>> tokenized;
  tokenized.reserve(contexts.size());
  for (const std::string& ctx : contexts) {
    std::vector<std::string> toks;
    for (std::string& t : tokenize_alpha(ctx, opts.min_token_len)) {
      if (stopwords().count(t)) continue;
      toks.push_back(std::move(t));
    }
    for (const std::string& t : toks) ++freq[t];
    tokenized.push_back(std::move(toks));
  }

  Corpus corpus;
  for (const auto& toks : tokenized) {
    std::vector<int32_t> doc;
    for (const std::string& t : toks) {
      if (freq[t] < opts.min_corpus_freq) continue;
      auto it = corpus.vocab_index.find(t);
      int32_t id;
      if (it == corpus.vocab_index.end()) {
        id = static_cast<int32_t>(corpus.vocab.size());
        corpus.vocab.push_back(t);
        corpus.vocab_index.emplace(t, id);
      } else {
        id = it->second;
      }
      doc.push_back(id);
    }
    if (doc.empty()) {
      corpus.doc_of_context.push_back(-1);
    } else {
      corpus.doc_of_context.push_back(static_cast<int32_t>(corpus.docs.size()));
      corpus.docs.push_back(std::move(doc));
    }
  }
  return corpus;
}

TopicModel lda_gibbs(const Corpus& corpus, int k, double alpha, double beta, int iterations,
                     uint64_t seed) {
  if (corpus.docs.empty()) throw std::invalid_argument("lda_gibbs: empty corpus");
  if (k < 1 || iterations < 1)
    throw std::invalid_argument("lda_gibbs: k and iterations must be >= 1");

  const int v = static_cast<int>(corpus.vocab.size());
  const int d_count = static_cast<int>(corpus.docs.size());

  std::vector<std::vector<int32_t>> assign(corpus.docs.size());
  lin::Matrix n_dk(d_count, k);
  lin::Matrix n_kw(k, v);
  std::vector<double> n_k(static_cast<std::size_t>(k), 0.0);

  Rng rng(seed);
  for (int d = 0; d < d_count; ++d) {
    const auto& doc = corpus.docs[static_cast<std::size_t>(d)];
    assign[static_cast<std::size_t>(d)].resize(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
      int topic = static_cast<int>(rng.uniform_index(static_cast<uint64_t>(k)));
      assign[static_cast<std::size_t>(d)][i] = topic;
      n_dk.at(d, topic) += 1.0;
      n_kw.at(topic, doc[i]) += 1.0;
      n_k[static_cast<std::size_t>(topic)] += 1.0;
    }
  }

  const double v_beta = v * beta;
  std::vector<double> cumulative(static_cast<std::size_t>(k));
  for (int iter = 0; iter < iterations; ++iter) {
    for (int d = 0; d < d_count; ++d) {
      const auto& doc = corpus.docs[static_cast<std::size_t>(d)];
      auto& za = assign[static_cast<std::size_t>(d)];
      for (std::size_t i = 0; i < doc.size(); ++i) {
        int32_t w = doc[i];
        int old_topic = za[i];
        n_dk.at(d, old_topic) -= 1.0;
        n_kw.at(old_topic, w) -= 1.0;
        n_k[static_cast<std::size_t>(old_topic)] -= 1.0;

        double total = 0.0;
        for (int t = 0; t < k; ++t) {
          double p = (n_dk.at(d, t) + alpha) * (n_kw.at(t, w) + beta) /
                     (n_k[static_cast<std::size_t>(t)] + v_beta);
          total += p;
          cumulative[static_cast<std::size_t>(t)] = total;
        }
        double u = rng.uniform01() * total;
        int new_topic = k - 1;
        for (int t = 0; t < k; ++t) {
          if (u < cumulative[static_cast<std::size_t>(t)]) {
            new_topic = t;
            break;
          }
        }
        za[i] = static_cast<int32_t>(new_topic);
        n_dk.at(d, new_topic) += 1.0;
        n_kw.at(new_topic, w) += 1.0;
        n_k[static_cast<std::size_t>(new_topic)] += 1.0;
      }
    }
  }

  TopicModel model;
  model.k = k;
  model.alpha = alpha;
  model.beta = beta;
  model.seed = seed;
  model.assignments = std::move(assign);
  model.phi = lin::Matrix(k, v);
  for (int t = 0; t < k; ++t)
    for (int w = 0; w < v; ++w)
      model.phi.at(t, w) = (n_kw.at(t, w) + beta) / (n_k[static_cast<std::size_t>(t)] + v_beta);
  model.theta = lin::Matrix(d_count, k);
  for (int d = 0; d < d_count; ++d) {
    double len = static_cast<double>(corpus.docs[static_cast<std::size_t>(d)].size());
    for (int t = 0; t < k; ++t)
      model.theta.at(d, t) = (n_dk.at(d, t) + alpha) / (len + k * alpha);
  }
  return model;
}

int assign_topic(const std::string& context, const TopicModel& model, const Corpus& corpus) {
  std::vector<int32_t> ids;
  for (const std::string& t : tokenize_alpha(context, 3)) {
    auto it = corpus.vocab_index.find(t);
    if (it != corpus.vocab_index.end()) ids.push_back(it->second);
  }
  if (ids.empty()) return -1;

  int best = 0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < model.k; ++t) {
    // Uniform symmetric prior over topics adds a constant; omitted.
    double ll = 0.0;
    for (int32_t w : ids) ll += std::log(model.phi.at(t, w));
    if (ll > best_ll) {
      best_ll = ll;
      best = t;
    }
  }
  return best;
}

std::vector<std::string> top_terms(const TopicModel& model, const Corpus& corpus, int topic,
                                   int n) {
  std::vector<int> order(corpus.vocab.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    double pa = model.phi.at(topic, a), pb = model.phi.at(topic, b);
    if (pa != pb) return pa > pb;
    return corpus.vocab[static_cast<std::size_t>(a)] < corpus.vocab[static_cast<std::size_t>(b)];
  });
  std::vector<std::string> out;
  for (int i = 0; i < n && i < static_cast<int>(order.size()); ++i)
    out.push_back(corpus.vocab[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
  return out;
}

std::vector<TopicImportanceRow> topic_importance(
    std::span<const std::pair<int, double>> scored_events) {
  struct Bucket {
    double abs_sum = 0.0, pos_sum = 0.0, neg_sum = 0.0;
    int64_t freq = 0;
  };
  std::map<int, Bucket> buckets;
  for (const auto& [topic, score] : scored_events) {
    Bucket& b = buckets[topic];
    b.abs_sum += std::abs(score);
    if (score >= 0.0)
      b.pos_sum += score;
    else
      b.neg_sum += -score;
    b.freq += 1;
  }

  std::vector<TopicImportanceRow> rows;
  for (const auto& [topic, b] : buckets) {
    TopicImportanceRow row;
    row.topic = topic;
    row.freq = b.freq;
    row.abs_importance = b.abs_sum / static_cast<double>(b.freq);
    if (b.abs_sum > 0.0) {
      row.pos_pct = b.pos_sum / b.abs_sum;
      row.neg_pct = b.neg_sum / b.abs_sum;
    } else {
      row.pos_pct = 0.5;
      row.neg_pct = 0.5;
    }
    rows.push_back(row);
  }
  std::sort(rows.begin(), rows.end(), [](const TopicImportanceRow& a, const TopicImportanceRow& b) {
    if (a.abs_importance != b.abs_importance) return a.abs_importance > b.abs_importance;
    return a.topic < b.topic;
  });
  return rows;
}

}  // namespace ser
