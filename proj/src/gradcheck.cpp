#include "paag/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "paag/decoder.hpp"
#include "paag/discriminator.hpp"
#include "paag/encoders.hpp"
#include "paag/ops.hpp"

namespace paag {

GradCheckResult run_gradcheck(GradCheck& check, double tolerance, double step) {
  GradCheckResult r;
  r.name = check.name;
  for (auto& x : check.inputs) x.zero_grad();
  backward(check.loss());
  for (auto& x : check.inputs) {
    const std::vector<double> analytic(x.grad().begin(), x.grad().end());
    x.zero_grad();
    auto d = x.mutable_data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double keep = d[i];
      d[i] = keep + step;
      const double up = check.loss().item();
      d[i] = keep - step;
      const double down = check.loss().item();
      d[i] = keep;
      const double numeric = (up - down) / (2 * step);
      const double den = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
      r.max_rel_error = std::max(r.max_rel_error, std::abs(analytic[i] - numeric) / den);
      ++r.entries;
    }
  }
  r.passed = std::isfinite(r.max_rel_error) && r.max_rel_error <= tolerance;
  return r;
}

namespace {

Tensor rand(Shape shape, Rng& rng, double lo = -1, double hi = 1) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), true);
}

// Entries bounded away from zero, for ops with a kink there.
Tensor rand_away(Shape shape, Rng& rng) {
  Tensor t = rand(std::move(shape), rng, 0.1, 1.0);
  for (double& x : t.mutable_data())
    if (rng.bernoulli(0.5)) x = -x;
  return t;
}

// Weighted sum against fixed random weights so every output entry matters.
Tensor project(const Tensor& out, const Tensor& w) { return sum(mul(out, w)); }

Tensor weights_for(const Shape& shape, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(-1, 1);
  return Tensor::from(shape, std::move(v));
}

struct Builder {
  Rng rng;
  std::vector<GradCheck> checks;

  template <class F>
  void unary(const std::string& name, Tensor x, const Shape& out_shape, F f) {
    Tensor w = weights_for(out_shape, rng);
    checks.push_back({name, {x}, [x, w, f] { return project(f(x), w); }});
  }
  template <class F>
  void binary(const std::string& name, Tensor a, Tensor b, const Shape& out_shape, F f) {
    Tensor w = weights_for(out_shape, rng);
    checks.push_back({name, {a, b}, [a, b, w, f] { return project(f(a, b), w); }});
  }
};

}  // namespace

std::vector<GradCheck> op_gradchecks(std::uint64_t seed) {
  Builder b{Rng(seed), {}};
  auto& rng = b.rng;

  b.binary("add", rand({3, 4}, rng), rand({3, 4}, rng), {3, 4},
           [](const Tensor& x, const Tensor& y) { return add(x, y); });
  b.binary("add_bias", rand({3, 4}, rng), rand({4}, rng), {3, 4},
           [](const Tensor& x, const Tensor& y) { return add(x, y); });
  b.binary("sub", rand({5}, rng), rand({5}, rng), {5},
           [](const Tensor& x, const Tensor& y) { return sub(x, y); });
  b.binary("mul", rand({2, 3}, rng), rand({2, 3}, rng), {2, 3},
           [](const Tensor& x, const Tensor& y) { return mul(x, y); });
  b.binary("div", rand({4}, rng), rand({4}, rng, 0.5, 2.0), {4},
           [](const Tensor& x, const Tensor& y) { return div(x, y); });
  b.unary("neg", rand({4}, rng), {4}, [](const Tensor& x) { return neg(x); });
  b.unary("scale", rand({4}, rng), {4}, [](const Tensor& x) { return scale(x, -2.5); });
  b.unary("add_scalar", rand({4}, rng), {4}, [](const Tensor& x) { return add_scalar(x, 0.7); });
  b.binary("scale_by", rand({2, 3}, rng), rand({1}, rng), {2, 3},
           [](const Tensor& x, const Tensor& s) { return scale_by(x, s); });
  b.unary("tanh", rand({6}, rng, -2, 2), {6}, [](const Tensor& x) { return tanh(x); });
  b.unary("sigmoid", rand({6}, rng, -3, 3), {6}, [](const Tensor& x) { return sigmoid(x); });
  b.unary("relu", rand_away({6}, rng), {6}, [](const Tensor& x) { return relu(x); });
  b.unary("exp", rand({5}, rng), {5}, [](const Tensor& x) { return exp(x); });
  b.unary("log", rand({5}, rng, 0.3, 3.0), {5}, [](const Tensor& x) { return log(x); });
  b.unary("sqrt", rand({5}, rng, 0.3, 3.0), {5}, [](const Tensor& x) { return sqrt(x); });
  b.unary("softplus", rand({6}, rng, -4, 4), {6}, [](const Tensor& x) { return softplus(x); });
  b.binary("matmul_mm", rand({3, 4}, rng), rand({4, 2}, rng), {3, 2},
           [](const Tensor& x, const Tensor& y) { return matmul(x, y); });
  b.binary("matmul_mv", rand({3, 4}, rng), rand({4}, rng), {3},
           [](const Tensor& x, const Tensor& y) { return matmul(x, y); });
  b.binary("matmul_vm", rand({4}, rng), rand({4, 3}, rng), {3},
           [](const Tensor& x, const Tensor& y) { return matmul(x, y); });
  b.unary("transpose", rand({2, 5}, rng), {5, 2}, [](const Tensor& x) { return transpose(x); });
  b.binary("outer", rand({3}, rng), rand({2}, rng), {3, 2},
           [](const Tensor& x, const Tensor& y) { return outer(x, y); });
  b.unary("sum", rand({2, 3}, rng), {1}, [](const Tensor& x) { return sum(x); });
  b.binary("dot", rand({5}, rng), rand({5}, rng), {1},
           [](const Tensor& x, const Tensor& y) { return dot(x, y); });
  b.unary("expand", rand({1}, rng), {2, 3}, [](const Tensor& x) { return expand(x, {2, 3}); });
  b.unary("sum_rows", rand({3, 4}, rng), {4}, [](const Tensor& x) { return sum_rows(x); });
  b.unary("tile_rows", rand({4}, rng), {3, 4}, [](const Tensor& x) { return tile_rows(x, 3); });
  b.unary("max_rows", rand({4, 3}, rng), {3}, [](const Tensor& x) { return max_rows(x); });
  b.unary("reshape", rand({2, 3}, rng), {3, 2}, [](const Tensor& x) { return reshape(x, {3, 2}); });
  b.unary("rows_slice", rand({5, 2}, rng), {2, 2}, [](const Tensor& x) { return rows_slice(x, 1, 2); });
  b.unary("pad_rows", rand({2, 3}, rng), {4, 3}, [](const Tensor& x) { return pad_rows(x, 1, 4); });
  b.unary("row", rand({3, 4}, rng), {4}, [](const Tensor& x) { return row(x, 2); });
  b.binary("stack_rows", rand({3}, rng), rand({3}, rng), {2, 3},
           [](const Tensor& x, const Tensor& y) {
             const Tensor parts[] = {x, y};
             return stack_rows(parts);
           });
  b.binary("concat", rand({2}, rng), rand({3}, rng), {5}, [](const Tensor& x, const Tensor& y) {
    const Tensor parts[] = {x, y};
    return concat(parts);
  });
  b.unary("segment", rand({6}, rng), {3}, [](const Tensor& x) { return segment(x, 2, 3); });
  b.unary("pad_segment", rand({3}, rng), {7}, [](const Tensor& x) { return pad_segment(x, 2, 7); });
  b.unary("index_select", rand({5}, rng), {4}, [](const Tensor& x) {
    const std::size_t idx[] = {4, 0, 4, 2};
    return index_select(x, idx);
  });
  b.unary("index_add", rand({4}, rng), {6}, [](const Tensor& x) {
    const std::size_t idx[] = {5, 1, 5, 0};
    return index_add(x, idx, 6);
  });
  b.unary("gather_rows", rand({5, 3}, rng), {4, 3}, [](const Tensor& x) {
    const std::size_t ids[] = {0, 3, 3, 1};
    return gather_rows(x, ids, 0);
  });
  b.unary("scatter_rows", rand({3, 2}, rng), {4, 2}, [](const Tensor& x) {
    const std::size_t ids[] = {2, 0, 2};
    return scatter_rows(x, ids, 4);
  });
  b.unary("softmax", rand({5}, rng, -2, 2), {5}, [](const Tensor& x) { return softmax(x); });
  b.unary("softmax_masked", rand({5}, rng, -2, 2), {5},
          [](const Tensor& x) { return softmax(x, Mask{1, 0, 1, 1, 0}); });
  {
    Tensor x = rand({3}, rng), w = rand({3, 4}, rng), v = weights_for({4}, rng);
    b.checks.push_back({"grad_norm_of", {x, w}, [x, w, v] {
                          return grad_norm_of(dot(tanh(matmul(x, w)), v), x);
                        }});
  }
  {
    Rng init(seed + 1);
    ParamStore ps;
    auto p = nn::LstmParams::create(ps, "lstm", 3, 2, init);
    Tensor x = rand({3}, rng), h = rand({2}, rng), c = rand({2}, rng);
    Tensor w = weights_for({2}, rng);
    std::vector<Tensor> inputs{x, h, c};
    for (auto& [_, t] : ps.entries()) inputs.push_back(t);
    b.checks.push_back({"lstm_step", inputs, [p, x, h, c, w] {
                          auto s = nn::lstm_step(p, nn::lstm_input_projection(p, x), {h, c});
                          return add(project(s.h, w), project(s.c, w));
                        }});
  }
  return std::move(b.checks);
}

namespace {

data::Vocabulary toy_vocab() {
  return data::Vocabulary::from_words({"<pad>", "<unk>", "<s>", "</s>", "what", "color", "is",
                                       "it", "red", "blue", "the", "size"});
}

data::PaddedExample toy_example(const data::Vocabulary& vocab) {
  data::RawExample raw;
  raw.question = "what color is zork";
  raw.reviews = {"it is red", "the size is blue ok"};
  raw.attributes = {{"color", "red"}, {"size", "blue"}};
  raw.answer = "zork is red";
  return data::pad_single(data::encode_example(raw, vocab));
}

std::vector<Tensor> leaves(const ParamStore& ps) {
  std::vector<Tensor> out;
  for (const auto& [_, t] : ps.entries()) out.push_back(t);
  return out;
}

}  // namespace

std::vector<GradCheck> model_gradchecks(std::uint64_t seed) {
  const auto vocab = toy_vocab();
  const auto ex = toy_example(vocab);
  std::vector<GradCheck> checks;

  auto gen_store = std::make_shared<ParamStore>();
  Rng rng(seed);
  nn::GeneratorDims gd;
  gd.vocab = vocab.size();
  gd.embed = 4;
  gd.hidden = 3;
  const auto gp = nn::GeneratorParams::create(*gen_store, gd, rng);
  checks.push_back({"loss_g", leaves(*gen_store),
                    [gp, ex, gen_store] { return nn::teacher_forced(gp, ex).loss; }});

  auto critic_store = std::make_shared<ParamStore>();
  nn::CriticDims cd;
  cd.vocab = vocab.size();
  cd.embed = 4;
  cd.hidden = 3;
  cd.filters = 2;
  cd.projection = 3;
  const auto dp = nn::DiscriminatorParams::create(*critic_store, cd, rng);
  // Wider weights keep the toy critic's relu units alive, so the penalty
  // sees a nonzero input gradient.
  for (auto& [_, t] : critic_store->entries())
    for (double& x : t.mutable_data()) x *= 8.0;

  Tensor d_o, d_f, m, fused;
  {
    NoGradGuard guard;
    const auto ctx = nn::build_context(gp, ex);
    d_o = nn::teacher_forced(gp, ctx, ex).d_o;
    d_f = nn::no_facts_states(gp, ctx, ex);
    m = ctx.memory.m;
    fused = ctx.reviews.fusion.fused;
  }
  std::vector<data::TokenId> answer(ex.answer.begin(),
                                    ex.answer.begin() + static_cast<long>(ex.answer_length()));
  for (auto& id : answer)
    if (id >= vocab.size()) id = data::kUnk;

  for (bool per_step : {false, true}) {
    checks.push_back({per_step ? "loss_d_per_step" : "loss_d", leaves(*critic_store),
                      [=] {
                        Rng eps(seed + 7);
                        return nn::loss_d(dp, d_f, d_o, nn::encode_ground_truth(dp, answer), m,
                                          fused, 10.0, eps, per_step)
                            .loss;
                      }});
  }
  checks.push_back({"loss_d_vanilla", leaves(*critic_store), [=] {
                      return nn::loss_d_vanilla(dp, d_o, nn::encode_ground_truth(dp, answer), m,
                                                fused, false)
                          .loss;
                    }});
  // The critic sees the facts as constants on the generator side, so the
  // check holds them fixed too.
  checks.push_back({"loss_g_adversarial", leaves(*gen_store), [=] {
                      const auto run = nn::teacher_forced(gp, ex);
                      return add(run.loss,
                                 scale(nn::generator_adversarial(
                                           dp, run.d_o, m, fused,
                                           nn::AdversarialForm::wasserstein, false),
                                       0.1));
                    }});
  return checks;
}

bool GradCheckReport::passed() const {
  return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed; });
}

std::string GradCheckReport::text() const {
  std::string out;
  char buf[256];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof buf, "%-20s entries %6zu  max rel error %.3e  %s\n", r.name.c_str(),
                  r.entries, r.max_rel_error, r.passed ? "ok" : "FAIL");
    out += buf;
  }
  std::size_t failed = 0;
  for (const auto& r : results) failed += r.passed ? 0 : 1;
  std::snprintf(buf, sizeof buf, "%zu checks, %zu failed\n", results.size(), failed);
  return out + buf;
}

GradCheckReport run_gradchecks(std::vector<GradCheck> checks, double tolerance) {
  GradCheckReport rep;
  for (auto& c : checks) rep.results.push_back(run_gradcheck(c, tolerance));
  return rep;
}

}  // namespace paag
