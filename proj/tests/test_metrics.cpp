#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "paag/metrics.hpp"
#include "paag/rng.hpp"

using namespace paag;
using namespace paag::metrics;

namespace {

Sentence words(const std::string& s) { return data::tokenize(s); }

}  // namespace

TEST_CASE("BLEU hand-computed cases") {
  SUBCASE("perfect match") {
    auto r = bleu({words("a b c d e")}, {words("a b c d e")});
    for (double b : r.bleu_n) CHECK(b == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(r.brevity_penalty == 1.0);
  }
  SUBCASE("disjoint vocabularies") {
    auto r = bleu({words("x y z")}, {words("a b c")});
    CHECK(r.bleu_n[0] == 0.0);
    CHECK(r.bleu == 0.0);
  }
  SUBCASE("brevity penalty") {
    auto r = bleu({words("a b c")}, {words("a b c d")});
    CHECK(r.brevity_penalty == doctest::Approx(std::exp(1.0 - 4.0 / 3.0)).epsilon(1e-12));
    CHECK(std::abs(r.bleu_n[0] - 71.65313105737893) <= 1e-6);
    CHECK(std::abs(r.bleu - 71.65313105737893) <= 1e-6);
  }
  SUBCASE("clipped counts with smoothing") {
    auto r = bleu({words("the cat the cat")}, {words("the cat sat on the mat")});
    const double bp = std::exp(-0.5);
    CHECK(std::abs(r.bleu_n[0] - 100 * bp * 0.75) <= 1e-6);
    CHECK(std::abs(r.bleu_n[1] - 100 * bp * 0.5) <= 1e-6);
    CHECK(std::abs(r.bleu - 27.403115968356826) <= 1e-6);
    CHECK(r.precisions[2] == doctest::Approx(1.0 / 3));
    CHECK(r.precisions[3] == doctest::Approx(0.5));
  }
  SUBCASE("two-sentence corpus") {
    auto r = bleu({words("a b"), words("c d e")}, {words("a b"), words("c x e f")});
    CHECK(std::abs(r.bleu_n[0] - 100 * std::exp(-0.2) * 0.8) <= 1e-6);
    CHECK(std::abs(r.bleu - 49.47385908818387) <= 1e-6);
  }
}

TEST_CASE("BLEU errors and corpus-order invariance") {
  CHECK_THROWS_AS(bleu({}, {}), ContractError);
  CHECK_THROWS_AS(bleu({words("a")}, {}), ContractError);
  std::vector<Sentence> c{words("a b c d"), words("e f g"), words("a c e g i")};
  std::vector<Sentence> r{words("a b d"), words("e f g h"), words("a b c e g")};
  auto base = bleu(c, r);
  std::vector<Sentence> c2{c[2], c[0], c[1]}, r2{r[2], r[0], r[1]};
  auto shuffled = bleu(c2, r2);
  for (std::size_t n = 0; n < 4; ++n) {
    CHECK(shuffled.bleu_n[n] == base.bleu_n[n]);
    CHECK(base.bleu_n[n] >= 0.0);
    CHECK(base.bleu_n[n] <= 100.0);
  }
}

namespace {

struct Vectors {
  data::Vocabulary vocab = data::Vocabulary::from_words({"<pad>", "<unk>", "<s>", "</s>", "a", "b", "c", "d"});
  Tensor table = Tensor::matrix(8, 2, {0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 1, 1, 1, 1, -1});
};

}  // namespace

TEST_CASE("embedding metrics examples") {
  Vectors v;
  WordVectors wv(v.vocab, v.table);
  auto same = embedding_pair(words("a c d"), words("a c d"), wv);
  CHECK(same.average == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(same.greedy == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(same.extrema == doctest::Approx(1.0).epsilon(1e-9));

  auto orth = embedding_pair(words("a"), words("b"), wv);
  CHECK(std::abs(orth.average) < 1e-12);
  CHECK(std::abs(orth.greedy) < 1e-12);
  CHECK(std::abs(orth.extrema) < 1e-12);

  // cos(a,b) = 0, cos(c,b) = 1/sqrt2.
  auto hand = embedding_pair(words("a c"), words("b"), wv);
  const double r2 = 1 / std::sqrt(2.0);
  CHECK(hand.greedy == doctest::Approx(0.5 * (0.5 * r2 + r2)).epsilon(1e-12));
  CHECK(hand.average == doctest::Approx(0.5 / std::sqrt(1.25)).epsilon(1e-12));
  CHECK(hand.extrema == doctest::Approx(r2).epsilon(1e-12));

  auto unk = embedding_pair(words("zzz"), words("a"), wv);
  CHECK(unk.average == 0.0);

  auto corpus = embedding_metrics({words("a c d"), words("a")}, {words("a c d"), words("b")}, wv);
  CHECK(corpus.average == doctest::Approx(0.5).epsilon(1e-9));
}

namespace {

// Direct formula evaluation, written independently of the library.
std::vector<double> bm25_oracle(const Sentence& q, const std::vector<Sentence>& docs) {
  const double k1 = 1.2, b = 0.75;
  const double n = static_cast<double>(docs.size());
  double avg = 0;
  for (const auto& d : docs) avg += static_cast<double>(d.size()) / n;
  std::set<std::string> terms(q.begin(), q.end());
  std::vector<double> out;
  for (const auto& d : docs) {
    double s = 0;
    for (const auto& t : terms) {
      double df = 0;
      for (const auto& e : docs) df += std::count(e.begin(), e.end(), t) > 0 ? 1 : 0;
      const double f = static_cast<double>(std::count(d.begin(), d.end(), t));
      if (f == 0) continue;
      const double idf = std::log(1 + (n - df + 0.5) / (df + 0.5));
      s += idf * (f * (k1 + 1)) / (f + k1 * (1 - b + b * static_cast<double>(d.size()) / avg));
    }
    out.push_back(s);
  }
  return out;
}

std::vector<double> tfidf_oracle(const Sentence& q, const std::vector<Sentence>& docs) {
  std::set<std::string> vocab(q.begin(), q.end());
  for (const auto& d : docs) vocab.insert(d.begin(), d.end());
  const double n = static_cast<double>(docs.size());
  auto vec = [&](const Sentence& s) {
    std::vector<double> v;
    for (const auto& w : vocab) {
      double df = 0;
      for (const auto& e : docs) df += std::count(e.begin(), e.end(), w) > 0 ? 1 : 0;
      v.push_back(static_cast<double>(std::count(s.begin(), s.end(), w)) *
                  (std::log((n + 1) / (df + 1)) + 1));
    }
    return v;
  };
  const auto qv = vec(q);
  std::vector<double> out;
  for (const auto& d : docs) out.push_back(cosine(qv, vec(d)));
  return out;
}

std::vector<std::size_t> oracle_order(const std::vector<double>& s) {
  std::vector<std::size_t> idx(s.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  // Insertion sort: strictly greater scores move ahead, equal keep input order.
  for (std::size_t i = 1; i < idx.size(); ++i)
    for (std::size_t j = i; j > 0 && s[idx[j]] > s[idx[j - 1]]; --j) std::swap(idx[j], idx[j - 1]);
  return idx;
}

Sentence random_sentence(Rng& rng, std::size_t max_len) {
  static const std::vector<std::string> pool{"w0", "w1", "w2", "w3", "w4", "w5", "w6", "w7"};
  Sentence s(1 + rng.below(max_len));
  for (auto& w : s) w = rng.pick(pool);
  return s;
}

}  // namespace

TEST_CASE("BM25 and TF-IDF rankings match direct formula evaluation") {
  Rng rng(2024);
  for (int toy = 0; toy < 50; ++toy) {
    CAPTURE(toy);
    auto q = random_sentence(rng, 5);
    std::vector<Sentence> docs(1 + rng.below(6));
    for (auto& d : docs) d = random_sentence(rng, 8);

    auto bm = bm25_rank(q, docs);
    auto bm_scores = bm25_oracle(q, docs);
    for (std::size_t i = 0; i < docs.size(); ++i)
      CHECK(std::abs(bm.scores[i] - bm_scores[i]) <= 1e-12);
    CHECK(bm.order == oracle_order(bm.scores));
    CHECK(bm.order == oracle_order(bm_scores));

    auto tf = tfidf_rank(q, docs);
    auto tf_scores = tfidf_oracle(q, docs);
    for (std::size_t i = 0; i < docs.size(); ++i)
      CHECK(std::abs(tf.scores[i] - tf_scores[i]) <= 1e-12);
    CHECK(tf.order == oracle_order(tf_scores));
  }
}

TEST_CASE("ranking examples") {
  std::vector<Sentence> docs{words("x y z"), words("p q color"), words("x x y")};
  auto bm = bm25_rank(words("what color"), docs);
  CHECK(bm.order.front() == 1);

  auto none = bm25_rank(words("nothing here"), docs);
  CHECK(none.order == std::vector<std::size_t>{0, 1, 2});
  for (double s : none.scores) CHECK(s == 0.0);

  auto tf = tfidf_rank(words("p q color"), docs);
  CHECK(tf.order.front() == 1);
  CHECK(tf.scores[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tfidf_rank(words("nothing"), docs).scores[0] == 0.0);

  CHECK_THROWS_AS(bm25_rank(words("a"), {}), ContractError);
  CHECK_THROWS_AS(tfidf_rank(words("a"), {}), ContractError);
}

TEST_CASE("BM25 is non-decreasing in a matched term's frequency") {
  std::vector<Sentence> docs{words("a b c d"), words("b c d e"), words("c d e f")};
  double prev = bm25_rank(words("a"), docs).scores[0];
  for (int extra = 0; extra < 6; ++extra) {
    docs[0].push_back("a");
    docs[1].push_back("z");  // keeps the average length in step
    docs[2].push_back("z");
    const double s = bm25_rank(words("a"), docs).scores[0];
    CHECK(s >= prev);
    prev = s;
  }
}

TEST_CASE("paired t-test") {
  std::vector<double> a{0.31, 0.42, 0.25, 0.51, 0.38, 0.47};
  std::vector<double> b{0.28, 0.35, 0.27, 0.44, 0.30, 0.41};
  auto r = paired_t_test(a, b);
  CHECK(r.dof == 5);
  CHECK(r.t == doctest::Approx(3.145491638370513).epsilon(1e-10));
  CHECK(r.p_value == doctest::Approx(0.025508071868490984).epsilon(1e-8));
  CHECK(paired_t_test(a, a).p_value == 1.0);
  CHECK_THROWS_AS(paired_t_test({1.0}, {2.0}), ContractError);

  auto ms = mean_sd({1.0, 2.0, 3.0});
  CHECK(ms.mean == 2.0);
  CHECK(ms.sd == doctest::Approx(1.0));
}
