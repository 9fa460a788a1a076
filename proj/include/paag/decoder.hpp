#pragma once

#include <vector>

#include "paag/dataset.hpp"
#include "paag/encoders.hpp"
#include "paag/kvmn.hpp"

namespace paag::nn {

struct GeneratorDims {
  std::size_t vocab = 0;
  std::size_t embed = 32;
  std::size_t hidden = 32;
  bool attend_review_words = false;

  std::size_t state() const { return 2 * hidden; }    // D
  std::size_t context() const { return 4 * hidden; }  // width of g_t
  std::size_t attention() const { return hidden; }
};

/// Facts decoder weights (input-major).
struct DecoderParams {
  LstmParams lstm;  // input [g; e(y)], hidden D
  Tensor w_e;       // [(E + 4H) x D]
  Tensor b_e;       // [D]
  Tensor ws_q;      // [2H x A]
  Tensor ws_r;      // [2H x A]
  Tensor w_d;       // [D x A], shared by both attentions
  Tensor z_q;       // [A]
  Tensor z_r;       // [A]
  Tensor w_g;       // [D]
  Tensor b_g;       // [1]
  Tensor w_o;       // [(D + 4H) x D]
  Tensor b_o;       // [D]
  Tensor w_v;       // [D x V]
  Tensor b_v;       // [V]
  Tensor w_p;       // [D + 4H + E]
  Tensor b_p;       // [1]

  static DecoderParams create(ParamStore& ps, const GeneratorDims& dims, Rng& rng);
  static DecoderParams bind(const ParamStore& ps);
};

/// Everything trainable on the generator side.
struct GeneratorParams {
  GeneratorDims dims;
  Tensor embedding;  // [V x E], PAD row zero
  ReaderParams reader;
  Tensor w_a;  // [2H x E]
  DecoderParams decoder;

  static GeneratorParams create(ParamStore& ps, const GeneratorDims& dims, Rng& rng);
  static GeneratorParams bind(const ParamStore& ps, const GeneratorDims& dims);
};

/// Per-example encodings shared by every decoding step.
struct DecoderContext {
  EncodedQuestion question;
  EncodedReviews reviews;
  MemoryReadout memory;
  Tensor q_proj;       // question states W_s^q, [L_q x A]
  Tensor r_states;     // review summaries [T_r x 2H] or stacked review words
  Mask r_mask;
  Tensor r_proj;       // [N_r x A]
  std::vector<TokenId> question_ids;
  std::size_t n_oov = 0;
};

DecoderContext build_context(const GeneratorParams& p, const data::PaddedExample& ex);

struct DecoderState {
  LstmState lstm;  // h is d_t
  Tensor g;        // previous context, [4H]
  std::size_t t = 0;
};

/// d_0 = [m; h^q; c^r] W_e + b_e with zero cell and zero context.
DecoderState init_state(const DecoderParams& p, const Tensor& m, const Tensor& q_final,
                        const Tensor& fused);

struct StepOutput {
  Tensor d;        // [D]
  Tensor g;        // [4H]
  Tensor d_o;      // [D]
  Tensor p_vocab;  // [V]
  Tensor beta_q;   // [L_q], also the copy distribution
  Tensor beta_r;   // [N_r]
  Tensor gamma;    // [1]
  Tensor p_gen;    // [1]
  Tensor mixed;    // [V + n_oov]
};

/// One decoding step fed with the previous token (extended ids read UNK).
StepOutput decoder_step(const GeneratorParams& p, const DecoderContext& ctx,
                        DecoderState& state, TokenId y_prev);

/// mixed = [p_gen P_v ; 0] + (1 - p_gen) scatter(beta_q onto question ids).
Tensor mix_distribution(const Tensor& p_vocab, const Tensor& beta_q, const Tensor& p_gen,
                        const std::vector<TokenId>& question_ids, std::size_t n_oov);

struct ForcedRun {
  Tensor loss;  // mean -log mixed[y_t] over real answer steps, [1]
  Tensor d_o;   // [T x D], real steps only
  std::vector<StepOutput> steps;
};

/// Teacher-forced pass over the reference answer of `ex`.
ForcedRun teacher_forced(const GeneratorParams& p, const DecoderContext& ctx,
                         const data::PaddedExample& ex);
/// Convenience: build_context followed by teacher_forced.
ForcedRun teacher_forced(const GeneratorParams& p, const data::PaddedExample& ex);

/// Teacher-forced run with m, c^r and every context vector zeroed; returns
/// the d^o analogues [T x D]. The question encoding is kept.
Tensor no_facts_states(const GeneratorParams& p, const DecoderContext& ctx,
                       const data::PaddedExample& ex);

struct GenerationTrace {
  std::vector<TokenId> tokens;  // includes the final EOS when emitted
  std::vector<double> gammas;
  std::vector<double> p_gens;
  double log_prob = 0.0;
  double score() const;  // log_prob / tokens.size()
};

GenerationTrace decode_greedy(const GeneratorParams& p, const data::PaddedExample& ex,
                              std::size_t max_len);
/// Length-normalized beam search; candidates ranked by log-probability with
/// ties broken by lower token id.
GenerationTrace decode_beam(const GeneratorParams& p, const data::PaddedExample& ex,
                            std::size_t width, std::size_t max_len);

}  // namespace paag::nn
