#include "paag/decoder.hpp"

#include <algorithm>
#include <cmath>

namespace paag::nn {

using data::kEos;
using data::kSos;

DecoderParams DecoderParams::create(ParamStore& ps, const GeneratorDims& dims, Rng& rng) {
  const std::size_t e = dims.embed, h = dims.hidden, d = dims.state(), g = dims.context(),
                    a = dims.attention(), v = dims.vocab;
  DecoderParams p;
  p.lstm = LstmParams::create(ps, "decoder.lstm", g + e, d, rng);
  p.w_e = ps.add("decoder.w_e", {e + 4 * h, d}, rng);
  p.b_e = ps.add("decoder.b_e", {d}, rng);
  p.ws_q = ps.add("decoder.ws_q", {2 * h, a}, rng);
  p.ws_r = ps.add("decoder.ws_r", {2 * h, a}, rng);
  p.w_d = ps.add("decoder.w_d", {d, a}, rng);
  p.z_q = ps.add("decoder.z_q", {a}, rng);
  p.z_r = ps.add("decoder.z_r", {a}, rng);
  p.w_g = ps.add("decoder.w_g", {d}, rng);
  p.b_g = ps.add("decoder.b_g", {1}, rng);
  p.w_o = ps.add("decoder.w_o", {d + g, d}, rng);
  p.b_o = ps.add("decoder.b_o", {d}, rng);
  p.w_v = ps.add("decoder.w_v", {d, v}, rng);
  p.b_v = ps.add("decoder.b_v", {v}, rng);
  p.w_p = ps.add("decoder.w_p", {d + g + e}, rng);
  p.b_p = ps.add("decoder.b_p", {1}, rng);
  return p;
}

DecoderParams DecoderParams::bind(const ParamStore& ps) {
  DecoderParams p;
  p.lstm = LstmParams::bind(ps, "decoder.lstm");
  p.w_e = ps.get("decoder.w_e");
  p.b_e = ps.get("decoder.b_e");
  p.ws_q = ps.get("decoder.ws_q");
  p.ws_r = ps.get("decoder.ws_r");
  p.w_d = ps.get("decoder.w_d");
  p.z_q = ps.get("decoder.z_q");
  p.z_r = ps.get("decoder.z_r");
  p.w_g = ps.get("decoder.w_g");
  p.b_g = ps.get("decoder.b_g");
  p.w_o = ps.get("decoder.w_o");
  p.b_o = ps.get("decoder.b_o");
  p.w_v = ps.get("decoder.w_v");
  p.b_v = ps.get("decoder.b_v");
  p.w_p = ps.get("decoder.w_p");
  p.b_p = ps.get("decoder.b_p");
  return p;
}

GeneratorParams GeneratorParams::create(ParamStore& ps, const GeneratorDims& dims, Rng& rng) {
  if (dims.vocab <= data::kReserved)
    throw ConfigError("generator vocabulary must exceed the reserved ids");
  GeneratorParams p;
  p.dims = dims;
  p.embedding = ps.add("embedding", {dims.vocab, dims.embed}, rng);
  auto table = p.embedding.mutable_data();
  std::fill(table.begin(), table.begin() + static_cast<long>(dims.embed), 0.0);
  p.reader = ReaderParams::create(ps, dims.embed, dims.hidden, rng);
  p.w_a = ps.add("kvmn.w_a", {2 * dims.hidden, dims.embed}, rng);
  p.decoder = DecoderParams::create(ps, dims, rng);
  return p;
}

GeneratorParams GeneratorParams::bind(const ParamStore& ps, const GeneratorDims& dims) {
  GeneratorParams p;
  p.dims = dims;
  p.embedding = ps.get("embedding");
  p.reader = ReaderParams::bind(ps);
  p.w_a = ps.get("kvmn.w_a");
  p.decoder = DecoderParams::bind(ps);
  if (p.embedding.shape() != Shape{dims.vocab, dims.embed})
    throw ConfigError("embedding shape " + shape_str(p.embedding.shape()) +
                      " does not match the configured vocabulary and embedding size");
  return p;
}

DecoderContext build_context(const GeneratorParams& p, const data::PaddedExample& ex) {
  DecoderContext ctx;
  ctx.question = encode_question(p.reader, p.embedding, ex.question, ex.question_mask);
  ctx.reviews = encode_reviews(p.reader, p.embedding, ctx.question, ex.reviews,
                               ex.review_word_masks, ex.review_mask);
  ctx.memory = attend_memory(
      p.w_a, ctx.question.final_state,
      make_memory(p.embedding, ex.attr_keys, ex.attr_values, ex.attr_mask));
  ctx.q_proj = matmul(ctx.question.states, p.decoder.ws_q);
  if (p.dims.attend_review_words) {
    std::vector<Tensor> rows;
    for (std::size_t i = 0; i < ex.reviews.size(); ++i) {
      if (!ex.review_mask[i]) continue;
      const auto& states = ctx.reviews.states[i];
      for (std::size_t j = 0; j < states.rows(); ++j) {
        rows.push_back(row(states, j));
        ctx.r_mask.push_back(ex.review_word_masks[i][j]);
      }
    }
    ctx.r_states = stack_rows(rows);
  } else {
    ctx.r_states = ctx.reviews.summaries;
    ctx.r_mask = ex.review_mask;
  }
  ctx.r_proj = matmul(ctx.r_states, p.decoder.ws_r);
  ctx.question_ids = ex.question;
  ctx.n_oov = ex.n_oov;
  return ctx;
}

DecoderState init_state(const DecoderParams& p, const Tensor& m, const Tensor& q_final,
                        const Tensor& fused) {
  std::vector<Tensor> facts{m, q_final, fused};
  DecoderState s;
  s.lstm.h = add(matmul(concat(facts), p.w_e), p.b_e);
  s.lstm.c = Tensor::zeros({p.w_e.cols()});
  s.g = Tensor::zeros({p.w_o.rows() - p.w_e.cols()});
  return s;
}

Tensor mix_distribution(const Tensor& p_vocab, const Tensor& beta_q, const Tensor& p_gen,
                        const std::vector<TokenId>& question_ids, std::size_t n_oov) {
  const std::size_t total = p_vocab.size() + n_oov;
  Tensor gen = pad_segment(scale_by(p_vocab, p_gen), 0, total);
  Tensor copy = index_add(scale_by(beta_q, add_scalar(neg(p_gen), 1.0)), question_ids, total);
  return add(gen, copy);
}

namespace {

Tensor attend(const Tensor& proj, const Tensor& d_proj, const Tensor& z, const Mask& mask) {
  return softmax(matmul(tanh(add(proj, d_proj)), z), mask);
}

Tensor lstm_advance(const GeneratorParams& p, DecoderState& state, const Tensor& e_prev) {
  std::vector<Tensor> in{state.g, e_prev};
  state.lstm = lstm_step(p.decoder.lstm, lstm_input_projection(p.decoder.lstm, concat(in)),
                         state.lstm);
  return state.lstm.h;
}

}  // namespace

StepOutput decoder_step(const GeneratorParams& p, const DecoderContext& ctx,
                        DecoderState& state, TokenId y_prev) {
  const auto& dp = p.decoder;
  const TokenId ids[1] = {y_prev};
  Tensor e_prev = row(embed(p.embedding, ids), 0);

  StepOutput out;
  out.d = lstm_advance(p, state, e_prev);
  Tensor d_proj = matmul(out.d, dp.w_d);
  out.beta_q = attend(ctx.q_proj, d_proj, dp.z_q, ctx.question.mask);
  out.beta_r = attend(ctx.r_proj, d_proj, dp.z_r, ctx.r_mask);
  Tensor g_q = matmul(out.beta_q, ctx.question.states);
  Tensor g_r = matmul(out.beta_r, ctx.r_states);
  out.gamma = sigmoid(add(dot(dp.w_g, out.d), dp.b_g));
  std::vector<Tensor> halves{scale_by(g_r, out.gamma),
                             scale_by(g_q, add_scalar(neg(out.gamma), 1.0))};
  out.g = concat(halves);

  std::vector<Tensor> dg{out.d, out.g};
  Tensor dg_cat = concat(dg);
  out.d_o = add(matmul(dg_cat, dp.w_o), dp.b_o);
  out.p_vocab = softmax(add(matmul(out.d_o, dp.w_v), dp.b_v));
  std::vector<Tensor> gen_in{dg_cat, e_prev};
  out.p_gen = sigmoid(add(dot(concat(gen_in), dp.w_p), dp.b_p));
  out.mixed = mix_distribution(out.p_vocab, out.beta_q, out.p_gen, ctx.question_ids, ctx.n_oov);

  state.g = out.g;
  ++state.t;
  return out;
}

ForcedRun teacher_forced(const GeneratorParams& p, const DecoderContext& ctx,
                         const data::PaddedExample& ex) {
  const std::size_t limit = p.dims.vocab + ctx.n_oov;
  const std::size_t steps = ex.answer_length();
  if (steps == 0) throw DataError("teacher_forced: empty reference answer");
  for (std::size_t t = 0; t < steps; ++t)
    if (ex.answer[t] >= limit)
      throw DataError("reference id " + std::to_string(ex.answer[t]) + " outside [0, " +
                      std::to_string(limit) + ")");

  DecoderState state = init_state(p.decoder, ctx.memory.m, ctx.question.final_state,
                                  ctx.reviews.fusion.fused);
  ForcedRun run;
  std::vector<Tensor> nll, d_o;
  TokenId prev = kSos;
  for (std::size_t t = 0; t < steps; ++t) {
    auto step = decoder_step(p, ctx, state, prev);
    const std::size_t target[1] = {ex.answer[t]};
    nll.push_back(log(index_select(step.mixed, target)));
    d_o.push_back(step.d_o);
    run.steps.push_back(std::move(step));
    prev = ex.answer[t];
  }
  run.loss = scale(sum(concat(nll)), -1.0 / static_cast<double>(steps));
  run.d_o = stack_rows(d_o);
  return run;
}

ForcedRun teacher_forced(const GeneratorParams& p, const data::PaddedExample& ex) {
  return teacher_forced(p, build_context(p, ex), ex);
}

Tensor no_facts_states(const GeneratorParams& p, const DecoderContext& ctx,
                       const data::PaddedExample& ex) {
  NoGradGuard guard;
  const auto& dp = p.decoder;
  const std::size_t two_h = 2 * p.dims.hidden;
  DecoderState state = init_state(dp, Tensor::zeros({p.dims.embed}), ctx.question.final_state,
                                  Tensor::zeros({two_h}));
  const Tensor zero_g = state.g;
  std::vector<Tensor> rows;
  TokenId prev = kSos;
  for (std::size_t t = 0; t < ex.answer_length(); ++t) {
    const TokenId ids[1] = {prev};
    Tensor d = lstm_advance(p, state, row(embed(p.embedding, ids), 0));
    std::vector<Tensor> dg{d, zero_g};
    rows.push_back(add(matmul(concat(dg), dp.w_o), dp.b_o));
    state.g = zero_g;
    prev = ex.answer[t];
  }
  return stack_rows(rows);
}

double GenerationTrace::score() const {
  return tokens.empty() ? log_prob : log_prob / static_cast<double>(tokens.size());
}

namespace {

struct Hypothesis {
  GenerationTrace trace;
  DecoderState state;
};

struct Candidate {
  double log_prob;
  std::size_t parent;
  TokenId token;
};

}  // namespace

GenerationTrace decode_beam(const GeneratorParams& p, const data::PaddedExample& ex,
                            std::size_t width, std::size_t max_len) {
  if (width == 0) throw ConfigError("beam width must be >= 1");
  NoGradGuard guard;
  const DecoderContext ctx = build_context(p, ex);
  std::vector<Hypothesis> live(1);
  live[0].state = init_state(p.decoder, ctx.memory.m, ctx.question.final_state,
                             ctx.reviews.fusion.fused);
  std::vector<GenerationTrace> finished;

  for (std::size_t t = 0; t < max_len && !live.empty(); ++t) {
    std::vector<Candidate> cands;
    std::vector<StepOutput> outs;
    std::vector<DecoderState> states;
    for (std::size_t h = 0; h < live.size(); ++h) {
      DecoderState s = live[h].state;
      const TokenId prev = live[h].trace.tokens.empty() ? kSos : live[h].trace.tokens.back();
      outs.push_back(decoder_step(p, ctx, s, prev));
      states.push_back(std::move(s));
      const auto probs = outs.back().mixed.data();
      for (std::size_t k = 0; k < probs.size(); ++k)
        cands.push_back({live[h].trace.log_prob + std::log(probs[k]), h, k});
    }
    const std::size_t keep = std::min(width, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<long>(keep), cands.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                        if (a.token != b.token) return a.token < b.token;
                        return a.parent < b.parent;
                      });
    std::vector<Hypothesis> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const auto& c = cands[i];
      Hypothesis h{live[c.parent].trace, states[c.parent]};
      h.trace.tokens.push_back(c.token);
      h.trace.log_prob = c.log_prob;
      h.trace.gammas.push_back(outs[c.parent].gamma.item());
      h.trace.p_gens.push_back(outs[c.parent].p_gen.item());
      if (c.token == kEos)
        finished.push_back(std::move(h.trace));
      else
        next.push_back(std::move(h));
    }
    live = std::move(next);
  }
  for (auto& h : live) finished.push_back(std::move(h.trace));

  // Earliest finisher wins ties.
  std::size_t best = 0;
  for (std::size_t i = 1; i < finished.size(); ++i)
    if (finished[i].score() > finished[best].score()) best = i;
  return finished.empty() ? GenerationTrace{} : finished[best];
}

GenerationTrace decode_greedy(const GeneratorParams& p, const data::PaddedExample& ex,
                              std::size_t max_len) {
  NoGradGuard guard;
  const DecoderContext ctx = build_context(p, ex);
  DecoderState state = init_state(p.decoder, ctx.memory.m, ctx.question.final_state,
                                  ctx.reviews.fusion.fused);
  GenerationTrace trace;
  TokenId prev = kSos;
  for (std::size_t t = 0; t < max_len; ++t) {
    auto out = decoder_step(p, ctx, state, prev);
    const auto probs = out.mixed.data();
    const auto best = static_cast<TokenId>(
        std::max_element(probs.begin(), probs.end()) - probs.begin());
    trace.tokens.push_back(best);
    trace.log_prob += std::log(probs[best]);
    trace.gammas.push_back(out.gamma.item());
    trace.p_gens.push_back(out.p_gen.item());
    prev = best;
    if (best == kEos) break;
  }
  return trace;
}

}  // namespace paag::nn
