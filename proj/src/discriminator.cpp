#include "paag/discriminator.hpp"

#include <algorithm>

namespace paag::nn {

DiscriminatorParams DiscriminatorParams::create(ParamStore& ps, const CriticDims& dims,
                                                Rng& rng) {
  const std::size_t d = dims.state(), f = dims.filters, pr = dims.projection;
  DiscriminatorParams p;
  p.dims = dims;
  p.embedding = ps.add("critic.embedding", {dims.vocab, dims.embed}, rng);
  auto table = p.embedding.mutable_data();
  std::fill(table.begin(), table.begin() + static_cast<long>(dims.embed), 0.0);
  p.lstm = LstmParams::create(ps, "critic.lstm", dims.embed, dims.hidden, rng);
  p.w_z = ps.add("critic.w_z", {dims.hidden, d}, rng);
  p.b_z = ps.add("critic.b_z", {d}, rng);
  for (std::size_t w = 1; w <= CriticDims::kWidths; ++w) {
    for (std::size_t k = 0; k < w; ++k)
      p.conv[w - 1].push_back(ps.add(
          "critic.conv" + std::to_string(w) + "." + std::to_string(k), {d, f}, rng));
    p.b_c[w - 1] = ps.add("critic.b_c" + std::to_string(w), {f}, rng);
  }
  p.p_n = ps.add("critic.p_n", {CriticDims::kWidths * f, pr}, rng);
  p.p_m = ps.add("critic.p_m", {dims.embed, pr}, rng);
  p.p_c = ps.add("critic.p_c", {2 * dims.hidden, pr}, rng);
  p.b_p = ps.add("critic.b_p", {pr}, rng);
  p.w_h = ps.add("critic.w_h", {pr}, rng);
  p.b_h = ps.add("critic.b_h", {1}, rng);
  return p;
}

DiscriminatorParams DiscriminatorParams::bind(const ParamStore& ps, const CriticDims& dims) {
  DiscriminatorParams p;
  p.dims = dims;
  p.embedding = ps.get("critic.embedding");
  p.lstm = LstmParams::bind(ps, "critic.lstm");
  p.w_z = ps.get("critic.w_z");
  p.b_z = ps.get("critic.b_z");
  for (std::size_t w = 1; w <= CriticDims::kWidths; ++w) {
    for (std::size_t k = 0; k < w; ++k)
      p.conv[w - 1].push_back(
          ps.get("critic.conv" + std::to_string(w) + "." + std::to_string(k)));
    p.b_c[w - 1] = ps.get("critic.b_c" + std::to_string(w));
  }
  p.p_n = ps.get("critic.p_n");
  p.p_m = ps.get("critic.p_m");
  p.p_c = ps.get("critic.p_c");
  p.b_p = ps.get("critic.b_p");
  p.w_h = ps.get("critic.w_h");
  p.b_h = ps.get("critic.b_h");
  return p;
}

Tensor encode_ground_truth(const DiscriminatorParams& p, std::span<const TokenId> answer) {
  if (answer.empty()) throw ContractError("encode_ground_truth: empty answer");
  Tensor x = lstm_input_projection(p.lstm, embed(p.embedding, answer));
  LstmState s = lstm_zero_state(p.lstm.hidden);
  std::vector<Tensor> states;
  for (std::size_t t = 0; t < answer.size(); ++t) {
    s = lstm_step(p.lstm, row(x, t), s);
    states.push_back(s.h);
  }
  return add(matmul(stack_rows(states), p.w_z), p.b_z);
}

CriticScore critic_score(const DiscriminatorParams& p, const Tensor& states, const Tensor& m,
                         const Tensor& fused) {
  if (states.rank() != 2 || states.rows() == 0)
    throw DimensionError("critic_score: states " + shape_str(states.shape()));
  const std::size_t span = std::max(states.rows(), CriticDims::kWidths);
  Tensor x = states.rows() < span ? pad_rows(states, 0, span) : states;
  std::vector<Tensor> pooled;
  for (std::size_t w = 1; w <= CriticDims::kWidths; ++w) {
    const std::size_t n_out = span - w + 1;
    Tensor acc = matmul(rows_slice(x, 0, n_out), p.conv[w - 1][0]);
    for (std::size_t k = 1; k < w; ++k)
      acc = add(acc, matmul(rows_slice(x, k, n_out), p.conv[w - 1][k]));
    pooled.push_back(max_rows(relu(add(acc, p.b_c[w - 1]))));
  }
  CriticScore out;
  out.pooled = concat(pooled);
  Tensor hidden = relu(add(add(add(matmul(out.pooled, p.p_n), matmul(m, p.p_m)),
                               matmul(fused, p.p_c)),
                           p.b_p));
  out.score = add(dot(hidden, p.w_h), p.b_h);
  return out;
}

Tensor sequence_score(const DiscriminatorParams& p, const Tensor& states, const Tensor& m,
                      const Tensor& fused, bool per_step) {
  if (!per_step) return critic_score(p, states, m, fused).score;
  std::vector<Tensor> scores;
  for (std::size_t t = 0; t < states.rows(); ++t)
    scores.push_back(critic_score(p, reshape(row(states, t), {1, states.cols()}), m, fused).score);
  return scale(sum(concat(scores)), 1.0 / static_cast<double>(scores.size()));
}

Tensor interpolate(const Tensor& d_o, const Tensor& d_g, double eps) {
  if (d_o.shape() != d_g.shape())
    throw ContractError("interpolate: streams " + shape_str(d_o.shape()) + " and " +
                        shape_str(d_g.shape()) + " are not time-aligned");
  std::vector<double> v(d_o.size());
  const auto a = d_o.data(), b = d_g.data();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = eps * a[i] + (1.0 - eps) * b[i];
  return Tensor::from(d_o.shape(), std::move(v), true);
}

namespace {

// (||g|| - 1)^2 for one gradient block; a vanishing gradient gives the
// constant 1 since sqrt has no derivative at 0.
std::pair<Tensor, double> unit_norm_penalty(const Tensor& g) {
  Tensor sq = sum(mul(g, g));
  if (sq.item() == 0.0) return {Tensor::scalar(1.0), 0.0};
  Tensor norm = sqrt(sq);
  Tensor dev = add_scalar(norm, -1.0);
  return {mul(dev, dev), norm.item()};
}

void require_aligned(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ContractError("critic streams " + shape_str(a.shape()) + " and " +
                        shape_str(b.shape()) + " are not time-aligned");
}

}  // namespace

Penalty gradient_penalty(const DiscriminatorParams& p, const Tensor& point, const Tensor& m,
                         const Tensor& fused, bool per_step) {
  const Tensor inputs[1] = {point};
  Penalty out;
  if (!per_step) {
    Tensor g = grad(critic_score(p, point, m, fused).score, inputs, true)[0];
    auto [value, norm] = unit_norm_penalty(g);
    out.value = value;
    out.norm = norm;
    return out;
  }
  // Row t only reaches score t, so one backward pass yields every per-step gradient.
  const std::size_t rows = point.rows();
  std::vector<Tensor> scores;
  for (std::size_t t = 0; t < rows; ++t)
    scores.push_back(critic_score(p, reshape(row(point, t), {1, point.cols()}), m, fused).score);
  Tensor g = grad(sum(concat(scores)), inputs, true)[0];
  std::vector<Tensor> terms;
  for (std::size_t t = 0; t < rows; ++t) {
    auto [value, norm] = unit_norm_penalty(row(g, t));
    terms.push_back(value);
    out.norm += norm / static_cast<double>(rows);
  }
  out.value = scale(sum(concat(terms)), 1.0 / static_cast<double>(rows));
  return out;
}

CriticLoss loss_d(const DiscriminatorParams& p, const Tensor& d_f, const Tensor& d_o,
                  const Tensor& d_g, const Tensor& m, const Tensor& fused, double lambda,
                  Rng& rng, bool per_step) {
  require_aligned(d_f, d_o);
  require_aligned(d_o, d_g);
  const Tensor mc = m.detach(), cc = fused.detach(), fake = d_o.detach();
  Tensor s_f = sequence_score(p, d_f.detach(), mc, cc, per_step);
  Tensor s_o = sequence_score(p, fake, mc, cc, per_step);
  Tensor s_g = sequence_score(p, d_g, mc, cc, per_step);
  CriticLoss out;
  out.loss = sub(add(s_f, s_o), s_g);
  out.d_real = s_g.item();
  out.d_fake_facts = s_o.item();
  out.d_fake_nofacts = s_f.item();
  if (lambda != 0.0) {
    const double eps = rng.uniform();
    auto pen = gradient_penalty(p, interpolate(fake, d_g, eps), mc, cc, per_step);
    out.loss = add(out.loss, scale(pen.value, lambda));
    out.grad_penalty = pen.value.item();
    out.grad_norm = pen.norm;
  }
  return out;
}

CriticLoss loss_d_vanilla(const DiscriminatorParams& p, const Tensor& d_o, const Tensor& d_g,
                          const Tensor& m, const Tensor& fused, bool per_step) {
  require_aligned(d_o, d_g);
  const Tensor mc = m.detach(), cc = fused.detach();
  Tensor s_o = sequence_score(p, d_o.detach(), mc, cc, per_step);
  Tensor s_g = sequence_score(p, d_g, mc, cc, per_step);
  CriticLoss out;
  out.loss = add(softplus(neg(s_g)), softplus(s_o));
  out.d_real = s_g.item();
  out.d_fake_facts = s_o.item();
  return out;
}

Tensor generator_adversarial(const DiscriminatorParams& p, const Tensor& d_o, const Tensor& m,
                             const Tensor& fused, AdversarialForm form, bool per_step) {
  Tensor s = sequence_score(p, d_o, m.detach(), fused.detach(), per_step);
  switch (form) {
    case AdversarialForm::wasserstein:
      return neg(s);
    case AdversarialForm::minimax:
      return neg(softplus(s));
    case AdversarialForm::non_saturating:
      return softplus(neg(s));
  }
  throw ContractError("unknown adversarial form");
}

}  // namespace paag::nn
