#pragma once

#include <array>
#include <span>

#include "paag/decoder.hpp"

namespace paag::nn {

struct CriticDims {
  std::size_t vocab = 0;
  std::size_t embed = 32;
  std::size_t hidden = 32;  // ground-truth LSTM and reader size H
  std::size_t filters = 16;
  std::size_t projection = 32;
  static constexpr std::size_t kWidths = 3;  // kernel widths 1..3

  std::size_t state() const { return 2 * hidden; }
};

struct DiscriminatorParams {
  CriticDims dims;
  Tensor embedding;  // [V x E], the critic's own table
  LstmParams lstm;   // ground-truth answer encoder, hidden H
  Tensor w_z;        // [H x D]
  Tensor b_z;        // [D]
  /// conv[w-1][k]: [D x F] tap k of the width-w kernel.
  std::array<std::vector<Tensor>, CriticDims::kWidths> conv;
  std::array<Tensor, CriticDims::kWidths> b_c;  // [F]
  Tensor p_n;  // [3F x P]
  Tensor p_m;  // [E x P]
  Tensor p_c;  // [2H x P]
  Tensor b_p;  // [P]
  Tensor w_h;  // [P]
  Tensor b_h;  // [1]

  static DiscriminatorParams create(ParamStore& ps, const CriticDims& dims, Rng& rng);
  static DiscriminatorParams bind(const ParamStore& ps, const CriticDims& dims);
};

/// d^g_t = W_z LSTM(e(y_1..y_t)) + b_z over the real answer tokens, [T x D].
Tensor encode_ground_truth(const DiscriminatorParams& p, std::span<const TokenId> answer);

struct CriticScore {
  Tensor score;   // [1]
  Tensor pooled;  // N^*, [3F]
};

/// Convolutions of widths 1..3 over the rows of `states` (right-padded with
/// zero rows up to 3), ReLU, max over time, then
/// W_h . relu(N P_n + m P_m + c^r P_c + b_p) + b_h.
CriticScore critic_score(const DiscriminatorParams& p, const Tensor& states, const Tensor& m,
                         const Tensor& fused);

/// D over a sequence: one score for the whole sequence, or with `per_step`
/// the mean of single-row scores.
Tensor sequence_score(const DiscriminatorParams& p, const Tensor& states, const Tensor& m,
                      const Tensor& fused, bool per_step);

/// Fresh leaf eps d^o + (1 - eps) d^g, detached from both streams.
Tensor interpolate(const Tensor& d_o, const Tensor& d_g, double eps);

struct Penalty {
  Tensor value;      // (||grad|| - 1)^2, averaged over rows with per_step
  double norm = 0;   // mean gradient norm at the interpolate
};

/// Gradient penalty at the leaf `point`; differentiable in the critic.
Penalty gradient_penalty(const DiscriminatorParams& p, const Tensor& point, const Tensor& m,
                         const Tensor& fused, bool per_step);

struct CriticLoss {
  Tensor loss;
  double d_real = 0;
  double d_fake_facts = 0;
  double d_fake_nofacts = 0;
  double grad_penalty = 0;
  double grad_norm = 0;
};

/// D(d^f) + D(d^o) - D(d^g) + lambda (||grad D(d')|| - 1)^2 with d' drawn
/// with one eps ~ U[0,1) per sequence. lambda = 0 skips the penalty.
/// d^o and the facts are detached; d^g keeps its critic-side history.
CriticLoss loss_d(const DiscriminatorParams& p, const Tensor& d_f, const Tensor& d_o,
                  const Tensor& d_g, const Tensor& m, const Tensor& fused, double lambda,
                  Rng& rng, bool per_step = false);

/// softplus(-D(d^g)) + softplus(D(d^o)): BCE of sigmoid(D) with d^g real.
CriticLoss loss_d_vanilla(const DiscriminatorParams& p, const Tensor& d_o, const Tensor& d_g,
                          const Tensor& m, const Tensor& fused, bool per_step = false);

enum class AdversarialForm {
  wasserstein,     // -D(d^o)
  minimax,         // log(1 - sigmoid(D(d^o)))
  non_saturating,  // -log sigmoid(D(d^o))
};

/// Generator-side adversarial term; gradients reach d^o but the facts are
/// treated as constants.
Tensor generator_adversarial(const DiscriminatorParams& p, const Tensor& d_o, const Tensor& m,
                             const Tensor& fused, AdversarialForm form, bool per_step = false);

}  // namespace paag::nn
