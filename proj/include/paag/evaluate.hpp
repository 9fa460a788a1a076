#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "paag/dataset.hpp"
#include "paag/metrics.hpp"
#include "paag/train.hpp"

namespace paag {

struct SystemScores {
  metrics::BleuReport bleu;
  metrics::EmbeddingReport embedding;
  std::vector<double> bleu1_per_example;
};

SystemScores score_texts(const std::vector<metrics::Sentence>& candidates,
                         const std::vector<metrics::Sentence>& references,
                         const metrics::WordVectors& vectors);

struct EvalReport {
  std::size_t examples = 0;
  std::size_t beam = 0;
  SystemScores model, bm25, tfidf;
  nlohmann::json to_json() const;
};

/// Top-ranked review of each example under the given ranker.
std::vector<metrics::Sentence> extractive_answers(const std::vector<data::RawExample>& data,
                                                  bool use_bm25);

/// Throws DataError when most dataset tokens are unknown to the model's
/// vocabulary, which signals a checkpoint trained on another corpus.
void check_vocabulary(const Model& model, const std::vector<data::RawExample>& data);

/// Beam search with `beam` (0 takes the config value), BLEU and embedding
/// metrics, with BM25 and TF-IDF extractive baselines alongside.
EvalReport evaluate(const Model& model, const std::vector<data::RawExample>& data,
                    std::size_t beam = 0);

struct Generation {
  std::string question, generated, reference;
  double log_prob = 0;
  std::vector<double> gates, p_gen;
  nlohmann::json to_json() const;
};

std::vector<Generation> generate(const Model& model, const std::vector<data::RawExample>& data,
                                 std::size_t beam = 0);

}  // namespace paag
