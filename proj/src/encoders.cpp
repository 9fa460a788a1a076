#include "paag/encoders.hpp"

#include <algorithm>

namespace paag::nn {

namespace {

std::size_t prefix_length(const Mask& mask) {
  std::size_t n = 0;
  while (n < mask.size() && mask[n]) ++n;
  for (std::size_t i = n; i < mask.size(); ++i)
    if (mask[i]) throw ContractError("mask must mark a prefix of real tokens");
  return n;
}

}  // namespace

LstmParams LstmParams::create(ParamStore& ps, const std::string& prefix, std::size_t in,
                              std::size_t hidden, Rng& rng) {
  LstmParams p;
  p.w_x = ps.add(prefix + ".w_x", {in, 4 * hidden}, rng);
  p.w_h = ps.add(prefix + ".w_h", {hidden, 4 * hidden}, rng);
  p.b = ps.add(prefix + ".b", {4 * hidden}, rng);
  p.hidden = hidden;
  return p;
}

LstmParams LstmParams::bind(const ParamStore& ps, const std::string& prefix) {
  LstmParams p;
  p.w_x = ps.get(prefix + ".w_x");
  p.w_h = ps.get(prefix + ".w_h");
  p.b = ps.get(prefix + ".b");
  p.hidden = p.w_h.shape()[0];
  return p;
}

LstmState lstm_zero_state(std::size_t hidden) {
  return {Tensor::zeros({hidden}), Tensor::zeros({hidden})};
}

Tensor lstm_input_projection(const LstmParams& p, const Tensor& inputs) {
  return add(matmul(inputs, p.w_x), p.b);
}

LstmState lstm_step(const LstmParams& p, const Tensor& x_proj, const LstmState& prev) {
  const std::size_t h = p.hidden;
  Tensor z = add(x_proj, matmul(prev.h, p.w_h));
  Tensor gates = sigmoid(segment(z, 0, 3 * h));
  Tensor in = segment(gates, 0, h);
  Tensor forget = segment(gates, h, h);
  Tensor out = segment(gates, 2 * h, h);
  Tensor cand = tanh(segment(z, 3 * h, h));
  Tensor c = add(mul(forget, prev.c), mul(in, cand));
  return {mul(out, tanh(c)), c};
}

Tensor embed(const Tensor& table, std::span<const TokenId> ids) {
  const std::size_t vocab = table.rows();
  std::vector<std::size_t> rows(ids.begin(), ids.end());
  for (auto& r : rows) {
    if (r >= vocab) r = data::kUnk;
  }
  return gather_rows(table, rows, static_cast<long>(data::kPad));
}

BiLstmOutput bilstm_encode(const LstmParams& fwd, const LstmParams& bwd,
                           const Tensor& embedded, const Mask& mask) {
  if (mask.size() != embedded.rows())
    throw DimensionError("bilstm_encode: mask length " + std::to_string(mask.size()) +
                         " for inputs " + shape_str(embedded.shape()));
  const std::size_t n = prefix_length(mask);
  if (n == 0) throw ContractError("bilstm_encode: sequence has no real token");
  const std::size_t h = fwd.hidden;

  Tensor real = rows_slice(embedded, 0, n);
  Tensor xf = lstm_input_projection(fwd, real);
  Tensor xb = lstm_input_projection(bwd, real);

  std::vector<Tensor> hf(n), hb(n);
  LstmState s = lstm_zero_state(h);
  for (std::size_t t = 0; t < n; ++t) {
    s = lstm_step(fwd, row(xf, t), s);
    hf[t] = s.h;
  }
  s = lstm_zero_state(bwd.hidden);
  for (std::size_t t = n; t-- > 0;) {
    s = lstm_step(bwd, row(xb, t), s);
    hb[t] = s.h;
  }

  std::vector<Tensor> rows;
  rows.reserve(mask.size());
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<Tensor> parts{hf[t], hb[t]};
    rows.push_back(concat(parts));
  }
  for (std::size_t t = n; t < mask.size(); ++t)
    rows.push_back(Tensor::zeros({h + bwd.hidden}));

  std::vector<Tensor> last{hf[n - 1], hb[0]};
  return {stack_rows(rows), concat(last), n};
}

ReaderParams ReaderParams::create(ParamStore& ps, std::size_t embed, std::size_t hidden,
                                  Rng& rng) {
  ReaderParams p;
  p.q_fwd = LstmParams::create(ps, "reader.q_fwd", embed, hidden, rng);
  p.q_bwd = LstmParams::create(ps, "reader.q_bwd", embed, hidden, rng);
  p.r_fwd = LstmParams::create(ps, "reader.r_fwd", embed, hidden, rng);
  p.r_bwd = LstmParams::create(ps, "reader.r_bwd", embed, hidden, rng);
  p.w_q = ps.add("reader.w_q", {2 * hidden, hidden}, rng);
  p.w_r = ps.add("reader.w_r", {2 * hidden, hidden}, rng);
  p.v = ps.add("reader.v", {hidden}, rng);
  p.w_f = ps.add("reader.w_f", {2 * hidden, 2 * hidden}, rng);
  return p;
}

ReaderParams ReaderParams::bind(const ParamStore& ps) {
  ReaderParams p;
  p.q_fwd = LstmParams::bind(ps, "reader.q_fwd");
  p.q_bwd = LstmParams::bind(ps, "reader.q_bwd");
  p.r_fwd = LstmParams::bind(ps, "reader.r_fwd");
  p.r_bwd = LstmParams::bind(ps, "reader.r_bwd");
  p.w_q = ps.get("reader.w_q");
  p.w_r = ps.get("reader.w_r");
  p.v = ps.get("reader.v");
  p.w_f = ps.get("reader.w_f");
  return p;
}

WordAttention review_word_attention(const ReaderParams& p, const Tensor& q_states,
                                    const Mask& q_mask, const Tensor& r_states,
                                    const Mask& r_mask) {
  const std::size_t nq = prefix_length(q_mask);
  if (nq == 0) throw ContractError("review_word_attention: empty question");
  Tensor q_proj = matmul(rows_slice(q_states, 0, nq), p.w_q);  // [nq x H]
  Tensor r_proj = matmul(r_states, p.w_r);                     // [L x H]
  std::vector<Tensor> per_step;
  per_step.reserve(nq);
  for (std::size_t k = 0; k < nq; ++k)
    per_step.push_back(matmul(tanh(add(r_proj, row(q_proj, k))), p.v));
  WordAttention out;
  out.scores = max_rows(stack_rows(per_step));
  out.alpha = softmax(out.scores, r_mask);
  out.summary = matmul(out.alpha, r_states);
  return out;
}

Fusion gated_fusion(const Tensor& w_f, const Tensor& summaries, const Mask& review_mask,
                    const Tensor& q_final) {
  if (std::none_of(review_mask.begin(), review_mask.end(), [](auto m) { return m != 0; }))
    throw ContractError("gated_fusion: no real review");
  Tensor u = matmul(summaries, matmul(w_f, q_final));
  Fusion f;
  f.gates = softmax(u, review_mask);
  f.fused = matmul(f.gates, summaries);
  return f;
}

EncodedQuestion encode_question(const ReaderParams& p, const Tensor& embedding,
                                std::span<const TokenId> ids, const Mask& mask) {
  auto out = bilstm_encode(p.q_fwd, p.q_bwd, embed(embedding, ids), mask);
  return {out.states, out.final_state, mask};
}

EncodedReviews encode_reviews(const ReaderParams& p, const Tensor& embedding,
                              const EncodedQuestion& question,
                              const std::vector<std::vector<TokenId>>& reviews,
                              const std::vector<Mask>& word_masks, const Mask& review_mask) {
  const std::size_t two_h = question.final_state.size();
  EncodedReviews out;
  std::vector<Tensor> summaries;
  for (std::size_t i = 0; i < reviews.size(); ++i) {
    if (!review_mask[i]) {
      out.states.emplace_back();
      out.alphas.emplace_back();
      summaries.push_back(Tensor::zeros({two_h}));
      continue;
    }
    auto enc = bilstm_encode(p.r_fwd, p.r_bwd, embed(embedding, reviews[i]), word_masks[i]);
    auto att = review_word_attention(p, question.states, question.mask, enc.states,
                                     word_masks[i]);
    out.states.push_back(enc.states);
    out.alphas.push_back(att.alpha);
    summaries.push_back(att.summary);
  }
  out.summaries = stack_rows(summaries);
  out.fusion = gated_fusion(p.w_f, out.summaries, review_mask, question.final_state);
  return out;
}

}  // namespace paag::nn
