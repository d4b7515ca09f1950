// Event-level topic modeling: collapsed-Gibbs LDA over context sentences and
// topic-level importance aggregation.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ser/linalg.hpp"

namespace ser {

struct Corpus {
  std::vector<std::vector<int32_t>> docs;  // token-id sequences, no empty docs
  std::vector<std::string> vocab;
  std::unordered_map<std::string, int32_t> vocab_index;
  // Maps each input context to its document index, -1 when filtered empty.
  std::vector<int32_t> doc_of_context;
};

struct CorpusOptions {
  std::size_t min_token_len = 3;
  int min_corpus_freq = 2;
};

// Lowercase alphabetic tokens, shipped English stopword list, length and
// corpus-frequency floors.
Corpus build_corpus(std::span<const std::string> contexts, const CorpusOptions& opts = {});

struct TopicModel {
  int k = 0;
  double alpha = 0.0, beta = 0.0;
  lin::Matrix phi;    // K x V topic-word distributions
  lin::Matrix theta;  // D x K document-topic proportions
  std::vector<std::vector<int32_t>> assignments;  // per doc, per token
  uint64_t seed = 0;
};

// Collapsed Gibbs sampling with symmetric priors; phi and theta come from the
// final-state counts with prior smoothing. Deterministic given seed.
TopicModel lda_gibbs(const Corpus& corpus, int k, double alpha, double beta, int iterations,
                     uint64_t seed);

// argmax_k of the context's in-vocabulary log-likelihood under phi; -1 when
// every token is out of vocabulary.
int assign_topic(const std::string& context, const TopicModel& model, const Corpus& corpus);

std::vector<std::string> top_terms(const TopicModel& model, const Corpus& corpus, int topic,
                                   int n);

struct TopicImportanceRow {
  int topic = -1;
  double abs_importance = 0.0;
  double pos_pct = 0.0, neg_pct = 0.0;
  int64_t freq = 0;
};

// Per-topic mean |score| with polarity shares, sorted descending with
// topic-id tie break. Input: (topic id, signed importance score) pairs.
std::vector<TopicImportanceRow> topic_importance(
    std::span<const std::pair<int, double>> scored_events);

}  // namespace ser
