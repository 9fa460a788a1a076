#include <doctest.h>

#include <cmath>
#include <numeric>

#include "paag/checkpoint.hpp"
#include "paag/ops.hpp"
#include "paag/optim.hpp"
#include "testing.hpp"

using namespace paag;
using paag::testing::check_grad;
using paag::testing::finite_diff;
using paag::testing::max_rel_error;
using paag::testing::random_tensor;

TEST_CASE("matmul basics") {
  auto eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  auto m = Tensor::matrix(2, 2, {1, 2, 3, 4});
  CHECK(matmul(eye, m).values() == std::vector<double>{1, 2, 3, 4});

  auto p = Tensor::matrix(2, 2, {1, 0, 0, 0});
  auto c = Tensor::matrix(2, 1, {5, 7});
  auto out = matmul(p, c);
  CHECK(out.shape() == Shape{2, 1});
  CHECK(out.values() == std::vector<double>{5, 0});
}

TEST_CASE("matmul gradient matches finite differences") {
  Rng rng(3);
  auto a = random_tensor({3, 4}, rng);
  auto b = random_tensor({4, 2}, rng);
  auto f = [&] { return sum(matmul(a, b)); };
  CHECK(check_grad(f, a) < 1e-6);
  CHECK(check_grad(f, b) < 1e-6);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  auto a = Tensor::zeros({2, 3});
  auto b = Tensor::zeros({2, 3});
  try {
    matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("and [2x3]") != std::string::npos);
  }
}

TEST_CASE("elementwise kinds") {
  auto zero = Tensor::scalar(0.0);
  CHECK(sigmoid(zero).item() == doctest::Approx(0.5));
  CHECK(tanh(zero).item() == 0.0);

  auto x = Tensor::from({2}, {2.0, -2.0}, true);
  backward(sum(relu(x)));
  CHECK(x.grad()[0] == 1.0);
  CHECK(x.grad()[1] == 0.0);

  auto a = Tensor::vector({1, 2});
  auto b = Tensor::vector({3, 4});
  std::vector<Tensor> ops{a, b};
  CHECK(elementwise(Elementwise::add, ops).values() == std::vector<double>{4, 6});
  CHECK(elementwise(Elementwise::mul, ops).values() == std::vector<double>{3, 8});
  CHECK_THROWS_AS(elementwise(Elementwise::neg, ops), ContractError);

  CHECK_THROWS_AS(log(Tensor::vector({1.0, 0.0})), DomainError);
  CHECK_THROWS_AS(log(Tensor::vector({-3.0})), DomainError);
}

TEST_CASE("bias broadcast only along the trailing dimension") {
  auto m = Tensor::matrix(2, 3, {0, 0, 0, 1, 1, 1});
  auto b = Tensor::vector({1, 2, 3});
  CHECK(add(m, b).values() == std::vector<double>{1, 2, 3, 2, 3, 4});
  CHECK_THROWS_AS(add(m, Tensor::vector({1, 2})), DimensionError);
  CHECK_THROWS_AS(add(b, m), DimensionError);
  CHECK_THROWS_AS(mul(m, b), DimensionError);
}

TEST_CASE("softmax examples") {
  auto u = softmax(Tensor::vector({0.7, 0.7, 0.7}));
  for (double p : u.data()) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  // Reference values in extended precision.
  const long double e = std::exp(-1000.0L);
  const long double p0 = 1.0L / (1.0L + e), p1 = e / (1.0L + e);
  auto s = softmax(Tensor::vector({1000.0, 0.0}));
  CHECK(std::isfinite(s[0]));
  CHECK(std::abs(s[0] - static_cast<double>(p0)) < 1e-15);
  CHECK(std::abs(s[1] - static_cast<double>(p1)) < 1e-300);

  auto m = softmax(Tensor::vector({1.0, 2.0}), Mask{0, 1});
  CHECK(m[0] == 0.0);
  CHECK(m[1] == 1.0);

  CHECK_THROWS_AS(softmax(Tensor::vector({1.0, 2.0}), Mask{0, 0}), ContractError);
}

TEST_CASE("softmax invariants") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    auto x = random_tensor({n}, rng, -20, 20, false);
    auto y = softmax(x);
    double total = 0;
    for (double p : y.data()) {
      CHECK(p >= 0.0);
      total += p;
    }
    CHECK(std::abs(total - 1.0) < 1e-12);

    const double c = rng.uniform(-50, 50);
    auto shifted = softmax(add_scalar(x, c));
    CHECK(max_rel_error(shifted.data(), y.data(), 1.0) < 1e-12);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    auto yp = softmax(index_select(x, perm));
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(yp[i] - y[perm[i]]) < 1e-15);
  }
}

TEST_CASE("backward contracts") {
  Rng rng(5);
  auto w = random_tensor({3, 4}, rng);
  auto x = random_tensor({4}, rng);
  auto unused = random_tensor({2}, rng);

  auto loss = [&] { return sum(matmul(w, x)); };
  backward(loss());
  // dL/dW[i][j] = x[j]
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(w.grad()[i * 4 + j] == doctest::Approx(x[j]));
  for (double g : unused.grad()) CHECK(g == 0.0);
  w.zero_grad();
  x.zero_grad();
  CHECK(check_grad(loss, w) < 1e-6);

  // second call accumulates
  backward(loss());
  backward(loss());
  CHECK(w.grad()[0] == doctest::Approx(2 * x[0]));

  CHECK_THROWS_AS(backward(matmul(w, x)), ContractError);
}

TEST_CASE("chained tanh(sigmoid(x)) matches the product rule") {
  auto x = Tensor::from({1}, {0.3}, true);
  backward(sum(tanh(sigmoid(x))));
  const double s = 1.0 / (1.0 + std::exp(-0.3));
  const double t = std::tanh(s);
  CHECK(x.grad()[0] == doctest::Approx((1 - t * t) * s * (1 - s)).epsilon(1e-14));
}

TEST_CASE("adagrad") {
  ParamStore ps;
  auto p = ps.add("p", Tensor::from({3}, {1.0, 1.0, 1.0}, true));
  AdagradState st;
  st.learning_rate = 0.1;

  SUBCASE("first step is lr * sign") {
    p.mutable_grad()[0] = 2.0;
    p.mutable_grad()[1] = -0.5;
    adagrad_step(ps, st);
    CHECK(p[0] == doctest::Approx(1.0 - 0.1 * 2.0 / (2.0 + 1e-8)));
    CHECK(p[1] == doctest::Approx(1.1).epsilon(1e-8));
    CHECK(p[2] == 1.0);
    CHECK(st.accumulators["p"][2] == 0.0);
    for (double g : p.grad()) CHECK(g == 0.0);
  }
  SUBCASE("zero gradient is a no-op") {
    adagrad_step(ps, st);
    CHECK(p.values() == std::vector<double>{1, 1, 1});
    for (double a : st.accumulators["p"]) CHECK(a == 0.0);
  }
  SUBCASE("identical gradients give shrinking steps") {
    p.mutable_grad()[0] = 0.7;
    adagrad_step(ps, st);
    const double first = 1.0 - p[0];
    const double acc1 = st.accumulators["p"][0];
    p.mutable_grad()[0] = 0.7;
    adagrad_step(ps, st);
    const double second = (1.0 - first) - p[0];
    CHECK(second < first);
    CHECK(st.accumulators["p"][0] > acc1);
  }
  SUBCASE("missing gradient") {
    ParamStore bad;
    bad.add("q", Tensor::zeros({2}, true));
    bad.entries().push_back({"frozen", Tensor::zeros({2})});
    CHECK_THROWS_AS(adagrad_step(bad, st), ContractError);
  }
}

TEST_CASE("clip_grad_norm rescales to the bound") {
  ParamStore ps;
  auto a = ps.add("a", Tensor::zeros({2}, true));
  auto b = ps.add("b", Tensor::zeros({1}, true));
  a.mutable_grad()[0] = 6;
  a.mutable_grad()[1] = 0;
  b.mutable_grad()[0] = 8;
  CHECK(clip_grad_norm(ps, 5.0) == doctest::Approx(10.0));
  CHECK(ps.grad_norm() == doctest::Approx(5.0));
  CHECK(a.grad()[0] == doctest::Approx(3.0));
}

TEST_CASE("grad_norm_of") {
  Rng rng(9);
  auto a = random_tensor({5}, rng, -1, 1, false);
  auto x = random_tensor({5}, rng);
  auto lin = grad_norm_of(dot(a, x), x);
  double na = 0;
  for (double v : a.data()) na += v * v;
  CHECK(lin.item() == doctest::Approx(std::sqrt(na)));

  auto quad = grad_norm_of(scale(dot(x, x), 0.5), x);
  double nx = 0;
  for (double v : x.data()) nx += v * v;
  CHECK(quad.item() == doctest::Approx(std::sqrt(nx)));

  auto other = random_tensor({5}, rng);
  CHECK_THROWS_AS(grad_norm_of(dot(a, x), other), ContractError);
}

TEST_CASE("gradient penalty double-backward matches finite differences") {
  // Toy critic D(x) = v . tanh(W x + b) on a 5-dim input.
  Rng rng(21);
  auto w = random_tensor({4, 5}, rng);
  auto b = random_tensor({4}, rng);
  auto v = random_tensor({4}, rng);
  auto x = random_tensor({5}, rng, -1, 1, false);
  auto penalty = [&] {
    auto xi = Tensor::from(x.shape(), x.values(), true);
    auto d = dot(v, tanh(add(matmul(w, xi), b)));
    auto n = grad_norm_of(d, xi);
    auto dev = add_scalar(n, -1.0);
    return mul(dev, dev);
  };
  CHECK(check_grad(penalty, w) < 1e-5);
  CHECK(check_grad(penalty, b) < 1e-5);
  CHECK(check_grad(penalty, v) < 1e-5);
}

namespace {

struct OpCase {
  const char* name;
  // Builds inputs from rng, returns (inputs, output builder).
  std::function<std::pair<std::vector<Tensor>, std::function<Tensor()>>(Rng&)> make;
};

std::size_t dim(Rng& rng) { return 1 + rng.below(4); }

Tensor weights_for(const Shape& s, Rng& rng) {
  return random_tensor(s, rng, -1, 1, false);
}

// Reduce any output to a scalar with fixed random weights so every output
// entry contributes a distinct coefficient.
std::function<Tensor()> weighted(std::function<Tensor()> f, Rng& rng) {
  Tensor probe;
  {
    NoGradGuard ng;
    probe = f();
  }
  auto w = weights_for(probe.shape(), rng);
  return [f, w] { return sum(mul(f(), w)); };
}

std::vector<OpCase> op_cases() {
  using In = std::vector<Tensor>;
  using R = std::pair<In, std::function<Tensor()>>;
  return {
      {"add", [](Rng& r) { auto n = dim(r), m = dim(r); auto a = random_tensor({n, m}, r), b = random_tensor({n, m}, r); return R{In{a, b}, weighted([=] { return add(a, b); }, r)}; }},
      {"add_bias", [](Rng& r) { auto n = dim(r), m = dim(r); auto a = random_tensor({n, m}, r), b = random_tensor({m}, r); return R{In{a, b}, weighted([=] { return add(a, b); }, r)}; }},
      {"sub", [](Rng& r) { auto n = dim(r); auto a = random_tensor({n}, r), b = random_tensor({n}, r); return R{In{a, b}, weighted([=] { return sub(a, b); }, r)}; }},
      {"mul", [](Rng& r) { auto n = dim(r); auto a = random_tensor({n}, r), b = random_tensor({n}, r); return R{In{a, b}, weighted([=] { return mul(a, b); }, r)}; }},
      {"div", [](Rng& r) { auto n = dim(r); auto a = random_tensor({n}, r), b = random_tensor({n}, r, 0.5, 2.0); return R{In{a, b}, weighted([=] { return div(a, b); }, r)}; }},
      {"neg", [](Rng& r) { auto a = random_tensor({dim(r)}, r); return R{In{a}, weighted([=] { return neg(a); }, r)}; }},
      {"scale", [](Rng& r) { auto a = random_tensor({dim(r)}, r); double c = r.uniform(-2, 2); return R{In{a}, weighted([=] { return scale(a, c); }, r)}; }},
      {"add_scalar", [](Rng& r) { auto a = random_tensor({dim(r)}, r); return R{In{a}, weighted([=] { return add_scalar(a, 0.3); }, r)}; }},
      {"scale_by", [](Rng& r) { auto a = random_tensor({dim(r), dim(r)}, r), s = random_tensor({1}, r); return R{In{a, s}, weighted([=] { return scale_by(a, s); }, r)}; }},
      {"tanh", [](Rng& r) { auto a = random_tensor({dim(r)}, r, -2, 2); return R{In{a}, weighted([=] { return tanh(a); }, r)}; }},
      {"sigmoid", [](Rng& r) { auto a = random_tensor({dim(r)}, r, -3, 3); return R{In{a}, weighted([=] { return sigmoid(a); }, r)}; }},
      {"relu", [](Rng& r) { auto a = random_tensor({dim(r)}, r, 0.1, 1); auto d = a.mutable_data(); for (auto& x : d) if (r.bernoulli(0.5)) x = -x; return R{In{a}, weighted([=] { return relu(a); }, r)}; }},
      {"exp", [](Rng& r) { auto a = random_tensor({dim(r)}, r); return R{In{a}, weighted([=] { return exp(a); }, r)}; }},
      {"log", [](Rng& r) { auto a = random_tensor({dim(r)}, r, 0.2, 3); return R{In{a}, weighted([=] { return log(a); }, r)}; }},
      {"sqrt", [](Rng& r) { auto a = random_tensor({dim(r)}, r, 0.2, 3); return R{In{a}, weighted([=] { return sqrt(a); }, r)}; }},
      {"softplus", [](Rng& r) { auto a = random_tensor({dim(r)}, r, -4, 4); return R{In{a}, weighted([=] { return softplus(a); }, r)}; }},
      {"matmul", [](Rng& r) { auto m = dim(r), k = dim(r), n = dim(r); auto a = random_tensor({m, k}, r), b = random_tensor({k, n}, r); return R{In{a, b}, weighted([=] { return matmul(a, b); }, r)}; }},
      {"matvec", [](Rng& r) { auto m = dim(r), k = dim(r); auto a = random_tensor({m, k}, r), b = random_tensor({k}, r); return R{In{a, b}, weighted([=] { return matmul(a, b); }, r)}; }},
      {"vecmat", [](Rng& r) { auto k = dim(r), n = dim(r); auto a = random_tensor({k}, r), b = random_tensor({k, n}, r); return R{In{a, b}, weighted([=] { return matmul(a, b); }, r)}; }},
      {"transpose", [](Rng& r) { auto a = random_tensor({dim(r), dim(r)}, r); return R{In{a}, weighted([=] { return transpose(a); }, r)}; }},
      {"outer", [](Rng& r) { auto a = random_tensor({dim(r)}, r), b = random_tensor({dim(r)}, r); return R{In{a, b}, weighted([=] { return outer(a, b); }, r)}; }},
      {"sum", [](Rng& r) { auto a = random_tensor({dim(r), dim(r)}, r); return R{In{a}, weighted([=] { return sum(a); }, r)}; }},
      {"expand", [](Rng& r) { auto a = random_tensor({1}, r); Shape s{dim(r), dim(r)}; return R{In{a}, weighted([=] { return expand(a, s); }, r)}; }},
      {"sum_rows", [](Rng& r) { auto a = random_tensor({dim(r), dim(r)}, r); return R{In{a}, weighted([=] { return sum_rows(a); }, r)}; }},
      {"tile_rows", [](Rng& r) { auto a = random_tensor({dim(r)}, r); auto m = dim(r); return R{In{a}, weighted([=] { return tile_rows(a, m); }, r)}; }},
      {"max_rows", [](Rng& r) { auto a = random_tensor({dim(r), dim(r)}, r); return R{In{a}, weighted([=] { return max_rows(a); }, r)}; }},
      {"reshape", [](Rng& r) { auto m = dim(r), n = dim(r); auto a = random_tensor({m, n}, r); return R{In{a}, weighted([=] { return reshape(a, {m * n}); }, r)}; }},
      {"rows_slice", [](Rng& r) { auto m = 2 + dim(r); auto a = random_tensor({m, dim(r)}, r); auto b = r.below(m - 1); return R{In{a}, weighted([=] { return rows_slice(a, b, m - b - 1); }, r)}; }},
      {"pad_rows", [](Rng& r) { auto a = random_tensor({dim(r), dim(r)}, r); return R{In{a}, weighted([=] { return pad_rows(a, 1, a.rows() + 2); }, r)}; }},
      {"stack_rows", [](Rng& r) { auto n = dim(r); auto a = random_tensor({n}, r), b = random_tensor({n}, r); return R{In{a, b}, weighted([=] { std::vector<Tensor> v{a, b, a}; return stack_rows(v); }, r)}; }},
      {"concat", [](Rng& r) { auto a = random_tensor({dim(r)}, r), b = random_tensor({dim(r)}, r); return R{In{a, b}, weighted([=] { std::vector<Tensor> v{a, b}; return concat(v); }, r)}; }},
      {"segment", [](Rng& r) { auto a = random_tensor({3 + dim(r)}, r); return R{In{a}, weighted([=] { return segment(a, 1, 2); }, r)}; }},
      {"pad_segment", [](Rng& r) { auto a = random_tensor({dim(r)}, r); return R{In{a}, weighted([=] { return pad_segment(a, 2, a.size() + 3); }, r)}; }},
      {"index_select", [](Rng& r) { auto n = dim(r); auto a = random_tensor({n}, r); std::vector<std::size_t> ix{r.below(n), r.below(n), r.below(n)}; return R{In{a}, weighted([=] { return index_select(a, ix); }, r)}; }},
      {"index_add", [](Rng& r) { auto a = random_tensor({3}, r); std::vector<std::size_t> ix{0, 2, 0}; return R{In{a}, weighted([=] { return index_add(a, ix, 4); }, r)}; }},
      {"gather_rows", [](Rng& r) { auto a = random_tensor({4, dim(r)}, r); std::vector<std::size_t> ix{1, 0, 3, 1}; return R{In{a}, weighted([=] { return gather_rows(a, ix, 0); }, r)}; }},
      {"scatter_rows", [](Rng& r) { auto a = random_tensor({3, dim(r)}, r); std::vector<std::size_t> ix{2, 0, 2}; return R{In{a}, weighted([=] { return scatter_rows(a, ix, 4); }, r)}; }},
      {"softmax", [](Rng& r) { auto n = 2 + dim(r); auto a = random_tensor({n}, r, -3, 3); Mask m(n, 1); m[r.below(n)] = 0; return R{In{a}, weighted([=] { return softmax(a, m); }, r)}; }},
  };
}

}  // namespace

TEST_CASE("every op matches finite differences over randomized shapes") {
  const auto cases = op_cases();
  CHECK(cases.size() >= 12);
  for (const auto& c : cases) {
    double worst = 0;
    for (int seed = 0; seed < 100; ++seed) {
      Rng rng(1000 + static_cast<std::uint64_t>(seed));
      auto [inputs, f] = c.make(rng);
      for (auto& in : inputs) {
        worst = std::max(worst, check_grad(f, in));
        for (double g : in.grad()) CHECK(std::isfinite(g));
      }
    }
    INFO("op " << c.name);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("second derivatives of smooth ops match finite differences") {
  // d/dx of (d f / dx) . u, checked for a composite of every smooth op kind.
  Rng rng(77);
  auto x = random_tensor({3}, rng, 0.3, 1.2);
  auto w = random_tensor({3, 3}, rng);
  auto u = random_tensor({3}, rng, -1, 1, false);
  auto f = [&] {
    auto xi = Tensor::from(x.shape(), x.values(), true);
    auto h = softmax(tanh(matmul(w, mul(sigmoid(xi), log(add_scalar(exp(xi), 1.0))))));
    auto y = dot(h, sqrt(softplus(xi)));
    auto g = grad(y, std::span<const Tensor>(&xi, 1), true).front();
    return dot(g, u);
  };
  CHECK(check_grad(f, w) < 1e-5);
}

TEST_CASE("checkpoint round trip") {
  Checkpoint c;
  c.tensors.emplace_back("a", Tensor::matrix(2, 2, {1.5, -2, 3e-300, 4}));
  c.tensors.emplace_back("b", Tensor::vector({0.1}));
  c.meta["vocab"] = {"x", "y"};
  auto bytes = encode_checkpoint(c);
  CHECK(bytes.rfind("PAAG1\n", 0) == 0);
  auto d = decode_checkpoint(bytes);
  REQUIRE(d.tensors.size() == 2);
  CHECK(d.find("a").values() == c.find("a").values());
  CHECK(d.find("a").shape() == Shape{2, 2});
  CHECK(d.meta == c.meta);
  CHECK(encode_checkpoint(d) == bytes);
  CHECK_THROWS_AS(decode_checkpoint("PAAG0\n2\n{}"), DataError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), DataError);
}
