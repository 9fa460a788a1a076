#pragma once

#include <span>
#include <string>
#include <vector>

#include "paag/ops.hpp"
#include "paag/params.hpp"
#include "paag/vocab.hpp"

namespace paag::nn {

using data::TokenId;

/// LSTM weights stored input-major: gates = x W_x + h W_h + b, gate order
/// (input, forget, output, candidate).
struct LstmParams {
  Tensor w_x;  // [in x 4H]
  Tensor w_h;  // [H x 4H]
  Tensor b;    // [4H]
  std::size_t hidden = 0;

  static LstmParams create(ParamStore& ps, const std::string& prefix,
                           std::size_t in, std::size_t hidden, Rng& rng);
  static LstmParams bind(const ParamStore& ps, const std::string& prefix);
};

struct LstmState {
  Tensor h;
  Tensor c;
};

LstmState lstm_zero_state(std::size_t hidden);
/// One step given the precomputed input projection x W_x + b.
LstmState lstm_step(const LstmParams& p, const Tensor& x_proj, const LstmState& prev);
/// [T x in] -> [T x 4H] input projections for every step; a rank-1 input
/// gives a single [4H] projection.
Tensor lstm_input_projection(const LstmParams& p, const Tensor& inputs);

/// Row lookup in the shared embedding table. Ids at or beyond the table size
/// (pointer-extended OOVs) read the UNK row; PAD reads a constant zero row.
Tensor embed(const Tensor& table, std::span<const TokenId> ids);

/// Hidden states of a bidirectional LSTM over a PAD-suffixed sequence.
struct BiLstmOutput {
  Tensor states;       // [L x 2H], zero rows at padded positions
  Tensor final_state;  // [fwd at last real token ; bwd at first token]
  std::size_t length = 0;
};

/// Throws ContractError when the mask selects no token.
BiLstmOutput bilstm_encode(const LstmParams& fwd, const LstmParams& bwd,
                           const Tensor& embedded, const Mask& mask);

/// Question-aware reader weights (input-major).
struct ReaderParams {
  LstmParams q_fwd, q_bwd, r_fwd, r_bwd;
  Tensor w_q;  // [2H x H]
  Tensor w_r;  // [2H x H]
  Tensor v;    // [H]
  Tensor w_f;  // [2H x 2H]

  static ReaderParams create(ParamStore& ps, std::size_t embed, std::size_t hidden, Rng& rng);
  static ReaderParams bind(const ParamStore& ps);
};

struct WordAttention {
  Tensor scores;   // s_{i,j} after the max over question steps, [L]
  Tensor alpha;    // [L]
  Tensor summary;  // c^r_i, [2H]
};

/// s^k_j = v . tanh(h^q_k W_q + h^r_j W_r); s_j = max_k s^k_j over real
/// question steps; alpha = masked softmax(s); summary = alpha^T H^r.
WordAttention review_word_attention(const ReaderParams& p, const Tensor& q_states,
                                    const Mask& q_mask, const Tensor& r_states,
                                    const Mask& r_mask);

struct Fusion {
  Tensor gates;  // u', [T_r]
  Tensor fused;  // c^r, [2H]
};

/// u_i = c_i^T W_f h^q; u' = masked softmax(u); c^r = sum_i u'_i c_i.
/// Throws ContractError when no review is real.
Fusion gated_fusion(const Tensor& w_f, const Tensor& summaries,
                    const Mask& review_mask, const Tensor& q_final);

struct EncodedQuestion {
  Tensor states;       // [L_q x 2H]
  Tensor final_state;  // [2H]
  Mask mask;
};

struct EncodedReviews {
  std::vector<Tensor> states;     // per review [L_r x 2H]; undefined for padding
  std::vector<Tensor> alphas;     // per review [L_r]; undefined for padding
  Tensor summaries;               // [T_r x 2H], zero rows for padding
  Fusion fusion;
};

EncodedQuestion encode_question(const ReaderParams& p, const Tensor& embedding,
                                std::span<const TokenId> ids, const Mask& mask);
EncodedReviews encode_reviews(const ReaderParams& p, const Tensor& embedding,
                              const EncodedQuestion& question,
                              const std::vector<std::vector<TokenId>>& reviews,
                              const std::vector<Mask>& word_masks,
                              const Mask& review_mask);

}  // namespace paag::nn
