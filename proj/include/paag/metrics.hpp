#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "paag/tensor.hpp"
#include "paag/vocab.hpp"

namespace paag::metrics {

using Sentence = std::vector<std::string>;

struct BleuReport {
  double bleu = 0;                      // = bleu_n[3]
  std::array<double, 4> bleu_n{};       // BLEU-1..4 in [0, 100]
  std::array<double, 4> precisions{};   // smoothed modified precisions
  double brevity_penalty = 0;
};

/// Corpus BLEU with brevity penalty. Zero n-gram matches for n >= 2 are
/// smoothed to (0 + 1) / (total + 1). Throws ContractError on an empty or
/// misaligned corpus.
BleuReport bleu(const std::vector<Sentence>& candidates,
                const std::vector<Sentence>& references);

/// Word vectors looked up through a vocabulary (unknown words read UNK).
class WordVectors {
 public:
  WordVectors(const data::Vocabulary& vocab, const Tensor& table)
      : vocab_(&vocab), table_(&table) {}
  std::span<const double> operator()(const std::string& word) const;
  std::size_t dim() const { return table_->cols(); }

 private:
  const data::Vocabulary* vocab_;
  const Tensor* table_;
};

struct EmbeddingReport {
  double average = 0;
  double greedy = 0;
  double extrema = 0;
};

/// Cosine of zero vectors is 0; empty sentences score 0.
double cosine(std::span<const double> a, std::span<const double> b);
EmbeddingReport embedding_pair(const Sentence& candidate, const Sentence& reference,
                               const WordVectors& vectors);
/// Means of the per-pair scores.
EmbeddingReport embedding_metrics(const std::vector<Sentence>& candidates,
                                  const std::vector<Sentence>& references,
                                  const WordVectors& vectors);

struct Ranking {
  std::vector<double> scores;      // per review, input order
  std::vector<std::size_t> order;  // best first, ties by lower index
};

/// Okapi BM25 over the example's reviews with
/// idf = ln((N - df + 0.5) / (df + 0.5) + 1), each distinct question term once.
Ranking bm25_rank(const Sentence& question, const std::vector<Sentence>& reviews,
                  double k1 = 1.2, double b = 0.75);
/// Cosine between tf-idf vectors, idf = ln((N + 1) / (df + 1)) + 1.
Ranking tfidf_rank(const Sentence& question, const std::vector<Sentence>& reviews);

struct TTest {
  double t = 0;
  double p_value = 1;
  std::size_t dof = 0;
};

/// Two-tailed paired t-test on per-item differences a_i - b_i.
TTest paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

struct MeanSd {
  double mean = 0;
  double sd = 0;  // sample standard deviation, 0 for a single value
};
MeanSd mean_sd(const std::vector<double>& xs);

}  // namespace paag::metrics
