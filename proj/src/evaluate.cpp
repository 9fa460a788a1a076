#include "paag/evaluate.hpp"

namespace paag {

namespace {

nlohmann::json scores_json(const SystemScores& s) {
  return {{"bleu", s.bleu.bleu},
          {"bleu1", s.bleu.bleu_n[0]},
          {"bleu2", s.bleu.bleu_n[1]},
          {"bleu3", s.bleu.bleu_n[2]},
          {"bleu4", s.bleu.bleu_n[3]},
          {"brevity_penalty", s.bleu.brevity_penalty},
          {"precisions", s.bleu.precisions},
          {"embedding_average", s.embedding.average},
          {"embedding_greedy", s.embedding.greedy},
          {"embedding_extrema", s.embedding.extrema},
          {"bleu1_per_example", s.bleu1_per_example}};
}

std::size_t beam_width(const Model& m, std::size_t beam) { return beam ? beam : m.config.beam; }

}  // namespace

SystemScores score_texts(const std::vector<metrics::Sentence>& candidates,
                         const std::vector<metrics::Sentence>& references,
                         const metrics::WordVectors& vectors) {
  SystemScores s;
  s.bleu = metrics::bleu(candidates, references);
  s.embedding = metrics::embedding_metrics(candidates, references, vectors);
  for (std::size_t i = 0; i < candidates.size(); ++i)
    s.bleu1_per_example.push_back(metrics::bleu({candidates[i]}, {references[i]}).bleu_n[0]);
  return s;
}

nlohmann::json EvalReport::to_json() const {
  return {{"examples", examples},
          {"beam", beam},
          {"model", scores_json(model)},
          {"bm25", scores_json(bm25)},
          {"tfidf", scores_json(tfidf)}};
}

std::vector<metrics::Sentence> extractive_answers(const std::vector<data::RawExample>& data,
                                                  bool use_bm25) {
  std::vector<metrics::Sentence> out;
  for (const auto& ex : data) {
    const auto q = data::tokenize(ex.question);
    std::vector<metrics::Sentence> reviews;
    for (const auto& r : ex.reviews) reviews.push_back(data::tokenize(r));
    if (reviews.empty()) {
      out.emplace_back();
      continue;
    }
    const auto rank = use_bm25 ? metrics::bm25_rank(q, reviews) : metrics::tfidf_rank(q, reviews);
    out.push_back(reviews[rank.order.front()]);
  }
  return out;
}

void check_vocabulary(const Model& model, const std::vector<data::RawExample>& data) {
  std::size_t known = 0, total = 0;
  for (const auto& sentence : data::corpus_sentences(data))
    for (const auto& w : sentence) {
      ++total;
      known += model.vocab.contains(w) ? 1 : 0;
    }
  if (total > 0 && 2 * known < total)
    throw DataError("vocabulary mismatch: only " + std::to_string(known) + " of " +
                    std::to_string(total) +
                    " dataset tokens are in the checkpoint vocabulary");
}

EvalReport evaluate(const Model& model, const std::vector<data::RawExample>& data,
                    std::size_t beam) {
  if (data.empty()) throw DataError("evaluation set is empty");
  check_vocabulary(model, data);
  NoGradGuard guard;
  const auto gp = model.gen();
  const std::size_t width = beam_width(model, beam);
  std::vector<metrics::Sentence> cands, refs;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto ex = data::encode_example(data[i], model.vocab, i);
    const auto trace = nn::decode_beam(gp, data::pad_single(ex), width, model.config.max_decode_len);
    cands.push_back(data::decode_tokens(trace.tokens, model.vocab, ex.oov_words));
    refs.push_back(data::tokenize(data[i].answer));
  }
  const metrics::WordVectors vectors(model.vocab, gp.embedding);
  EvalReport r;
  r.examples = data.size();
  r.beam = width;
  r.model = score_texts(cands, refs, vectors);
  r.bm25 = score_texts(extractive_answers(data, true), refs, vectors);
  r.tfidf = score_texts(extractive_answers(data, false), refs, vectors);
  return r;
}

nlohmann::json Generation::to_json() const {
  return {{"question", question}, {"generated", generated}, {"reference", reference},
          {"log_prob", log_prob}, {"gates", gates},         {"p_gen", p_gen}};
}

std::vector<Generation> generate(const Model& model, const std::vector<data::RawExample>& data,
                                 std::size_t beam) {
  check_vocabulary(model, data);
  NoGradGuard guard;
  const auto gp = model.gen();
  const std::size_t width = beam_width(model, beam);
  std::vector<Generation> out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto ex = data::encode_example(data[i], model.vocab, i);
    const auto trace = nn::decode_beam(gp, data::pad_single(ex), width, model.config.max_decode_len);
    Generation g;
    g.question = data[i].question;
    g.generated = data::join_tokens(data::decode_tokens(trace.tokens, model.vocab, ex.oov_words));
    g.reference = data[i].answer;
    g.log_prob = trace.log_prob;
    g.gates = trace.gammas;
    g.p_gen = trace.p_gens;
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace paag
