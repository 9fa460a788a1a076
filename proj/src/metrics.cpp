#include "paag/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include <boost/math/distributions/students_t.hpp>

namespace paag::metrics {

namespace {

using Counts = std::map<std::vector<std::string>, std::size_t>;

Counts ngrams(const Sentence& s, std::size_t n) {
  Counts c;
  for (std::size_t i = 0; i + n <= s.size(); ++i)
    ++c[std::vector<std::string>(s.begin() + static_cast<long>(i),
                                 s.begin() + static_cast<long>(i + n))];
  return c;
}

std::map<std::string, std::size_t> term_counts(const Sentence& s) {
  std::map<std::string, std::size_t> c;
  for (const auto& w : s) ++c[w];
  return c;
}

Ranking ranked(std::vector<double> scores) {
  Ranking r;
  r.order.resize(scores.size());
  std::iota(r.order.begin(), r.order.end(), 0);
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  r.scores = std::move(scores);
  return r;
}

}  // namespace

BleuReport bleu(const std::vector<Sentence>& candidates,
                const std::vector<Sentence>& references) {
  if (candidates.empty()) throw ContractError("bleu: empty corpus");
  if (candidates.size() != references.size())
    throw ContractError("bleu: " + std::to_string(candidates.size()) + " candidates for " +
                        std::to_string(references.size()) + " references");
  std::array<double, 4> matched{}, total{};
  double cand_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    cand_len += static_cast<double>(candidates[i].size());
    ref_len += static_cast<double>(references[i].size());
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto c = ngrams(candidates[i], n);
      const auto r = ngrams(references[i], n);
      for (const auto& [gram, count] : c) {
        auto it = r.find(gram);
        matched[n - 1] += static_cast<double>(std::min(count, it == r.end() ? 0 : it->second));
        total[n - 1] += static_cast<double>(count);
      }
    }
  }
  BleuReport rep;
  rep.brevity_penalty =
      cand_len == 0 ? 0.0 : (cand_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len));
  double log_sum = 0;
  for (std::size_t n = 0; n < 4; ++n) {
    double p;
    if (n == 0)
      p = total[0] == 0 ? 0.0 : matched[0] / total[0];
    else
      p = matched[n] == 0 ? 1.0 / (total[n] + 1.0) : matched[n] / total[n];
    rep.precisions[n] = p;
    if (p == 0) {
      for (std::size_t k = n; k < 4; ++k) rep.bleu_n[k] = 0.0;
      break;
    }
    log_sum += std::log(p);
    rep.bleu_n[n] = 100.0 * rep.brevity_penalty * std::exp(log_sum / static_cast<double>(n + 1));
  }
  rep.bleu = rep.bleu_n[3];
  return rep;
}

std::span<const double> WordVectors::operator()(const std::string& word) const {
  const std::size_t d = table_->cols();
  return table_->data().subspan(vocab_->lookup(word) * d, d);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0 || bb == 0) return 0.0;
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

namespace {

std::vector<double> mean_vector(const Sentence& s, const WordVectors& vec) {
  std::vector<double> m(vec.dim(), 0.0);
  for (const auto& w : s) {
    auto v = vec(w);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += v[i];
  }
  for (double& x : m) x /= static_cast<double>(s.size());
  return m;
}

std::vector<double> extrema_vector(const Sentence& s, const WordVectors& vec) {
  std::vector<double> e(vec.dim(), 0.0);
  for (const auto& w : s) {
    auto v = vec(w);
    for (std::size_t i = 0; i < e.size(); ++i)
      if (std::abs(v[i]) > std::abs(e[i])) e[i] = v[i];
  }
  return e;
}

double greedy_direction(const Sentence& from, const Sentence& to, const WordVectors& vec) {
  double total = 0;
  for (const auto& w : from) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& u : to) best = std::max(best, cosine(vec(w), vec(u)));
    total += best;
  }
  return total / static_cast<double>(from.size());
}

}  // namespace

EmbeddingReport embedding_pair(const Sentence& candidate, const Sentence& reference,
                               const WordVectors& vectors) {
  EmbeddingReport r;
  if (candidate.empty() || reference.empty()) return r;
  r.average = cosine(mean_vector(candidate, vectors), mean_vector(reference, vectors));
  r.extrema = cosine(extrema_vector(candidate, vectors), extrema_vector(reference, vectors));
  r.greedy = 0.5 * (greedy_direction(candidate, reference, vectors) +
                    greedy_direction(reference, candidate, vectors));
  return r;
}

EmbeddingReport embedding_metrics(const std::vector<Sentence>& candidates,
                                  const std::vector<Sentence>& references,
                                  const WordVectors& vectors) {
  if (candidates.size() != references.size())
    throw ContractError("embedding_metrics: misaligned corpus");
  EmbeddingReport out;
  if (candidates.empty()) return out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto r = embedding_pair(candidates[i], references[i], vectors);
    out.average += r.average;
    out.greedy += r.greedy;
    out.extrema += r.extrema;
  }
  const auto n = static_cast<double>(candidates.size());
  out.average /= n;
  out.greedy /= n;
  out.extrema /= n;
  return out;
}

Ranking bm25_rank(const Sentence& question, const std::vector<Sentence>& reviews, double k1,
                  double b) {
  if (reviews.empty()) throw ContractError("bm25_rank: no reviews");
  const auto n = static_cast<double>(reviews.size());
  std::vector<std::map<std::string, std::size_t>> tf;
  std::map<std::string, std::size_t> df;
  double total_len = 0;
  for (const auto& r : reviews) {
    tf.push_back(term_counts(r));
    for (const auto& [w, c] : tf.back()) ++df[w];
    total_len += static_cast<double>(r.size());
  }
  const double avgdl = total_len / n;
  const std::set<std::string> terms(question.begin(), question.end());
  std::vector<double> scores(reviews.size(), 0.0);
  for (std::size_t i = 0; i < reviews.size(); ++i) {
    const double len_norm =
        avgdl == 0 ? 1.0 : 1.0 - b + b * static_cast<double>(reviews[i].size()) / avgdl;
    for (const auto& t : terms) {
      auto it = tf[i].find(t);
      if (it == tf[i].end()) continue;
      const double d = static_cast<double>(df[t]);
      const double idf = std::log((n - d + 0.5) / (d + 0.5) + 1.0);
      const double f = static_cast<double>(it->second);
      scores[i] += idf * f * (k1 + 1.0) / (f + k1 * len_norm);
    }
  }
  return ranked(std::move(scores));
}

Ranking tfidf_rank(const Sentence& question, const std::vector<Sentence>& reviews) {
  if (reviews.empty()) throw ContractError("tfidf_rank: no reviews");
  const auto n = static_cast<double>(reviews.size());
  std::map<std::string, std::size_t> df;
  std::vector<std::map<std::string, std::size_t>> tf;
  for (const auto& r : reviews) {
    tf.push_back(term_counts(r));
    for (const auto& [w, c] : tf.back()) ++df[w];
  }
  auto idf = [&](const std::string& w) {
    auto it = df.find(w);
    const double d = it == df.end() ? 0.0 : static_cast<double>(it->second);
    return std::log((n + 1.0) / (d + 1.0)) + 1.0;
  };
  const auto q = term_counts(question);
  double q_norm = 0;
  for (const auto& [w, c] : q) q_norm += std::pow(static_cast<double>(c) * idf(w), 2);
  q_norm = std::sqrt(q_norm);
  std::vector<double> scores(reviews.size(), 0.0);
  for (std::size_t i = 0; i < reviews.size(); ++i) {
    double dot = 0, r_norm = 0;
    for (const auto& [w, c] : tf[i]) {
      const double rw = static_cast<double>(c) * idf(w);
      r_norm += rw * rw;
      auto it = q.find(w);
      if (it != q.end()) dot += rw * static_cast<double>(it->second) * idf(w);
    }
    r_norm = std::sqrt(r_norm);
    scores[i] = q_norm == 0 || r_norm == 0 ? 0.0 : dot / (q_norm * r_norm);
  }
  return ranked(std::move(scores));
}

MeanSd mean_sd(const std::vector<double>& xs) {
  MeanSd r;
  if (xs.empty()) return r;
  r.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() < 2) return r;
  double ss = 0;
  for (double x : xs) ss += (x - r.mean) * (x - r.mean);
  r.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return r;
}

TTest paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ContractError("paired_t_test: unequal sample sizes");
  if (a.size() < 2) throw ContractError("paired_t_test: needs at least two pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const auto stats = mean_sd(d);
  TTest r;
  r.dof = d.size() - 1;
  if (stats.sd == 0) {
    r.t = stats.mean == 0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), stats.mean);
    r.p_value = stats.mean == 0 ? 1.0 : 0.0;
    return r;
  }
  r.t = stats.mean / (stats.sd / std::sqrt(static_cast<double>(d.size())));
  boost::math::students_t dist(static_cast<double>(r.dof));
  r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

}  // namespace paag::metrics
