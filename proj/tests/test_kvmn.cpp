#include <doctest.h>

#include <cmath>

#include "paag/kvmn.hpp"
#include "testing.hpp"

using namespace paag;
using namespace paag::nn;
using paag::testing::check_grad;
using paag::testing::random_tensor;

namespace {

constexpr std::size_t kE = 4;
constexpr std::size_t kQ = 6;

struct Fixture {
  Rng rng{21};
  Tensor table = random_tensor({10, kE}, rng);
  Tensor w_a = random_tensor({kQ, kE}, rng);
  Tensor hq = random_tensor({kQ}, rng);
};

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("single attribute reads its value") {
  Fixture fx;
  std::vector<TokenId> k{4}, v{7};
  auto mem = make_memory(fx.table, k, v, Mask{1});
  auto out = attend_memory(fx.w_a, fx.hq, mem);
  CHECK(out.scores.values() == std::vector<double>{1.0});
  CHECK(max_abs_diff(out.m.data(), row(fx.table, 7).data()) < 1e-15);
}

TEST_CASE("zero key matcher gives uniform scores and mean value") {
  Fixture fx;
  auto w0 = Tensor::zeros({kQ, kE});
  std::vector<TokenId> k{4, 5, 6}, v{7, 8, 9};
  auto mem = make_memory(fx.table, k, v, Mask{1, 1, 1});
  auto out = attend_memory(w0, fx.hq, mem);
  for (std::size_t i = 0; i < 3; ++i) CHECK(out.scores[i] == doctest::Approx(1.0 / 3).epsilon(1e-12));
  for (std::size_t c = 0; c < kE; ++c)
    CHECK(out.m[c] == doctest::Approx((fx.table.at(7, c) + fx.table.at(8, c) + fx.table.at(9, c)) / 3));
}

TEST_CASE("engineered key wins by a margin of 20") {
  // hq W_a = (10, 0, ...) and keys e1 = (1, ...), e2 = (-1, ...).
  auto table = Tensor::zeros({6, kE});
  auto d = table.mutable_data();
  d[2 * kE] = 1.0;
  d[3 * kE] = -1.0;
  d[4 * kE + 1] = 3.0;
  d[5 * kE + 2] = 5.0;
  auto w_a = Tensor::zeros({kQ, kE});
  w_a.mutable_data()[0] = 10.0;
  auto hq = Tensor::zeros({kQ});
  hq.mutable_data()[0] = 1.0;
  std::vector<TokenId> k{2, 3}, v{4, 5};
  auto out = attend_memory(w_a, hq, make_memory(table, k, v, Mask{1, 1}));
  CHECK(out.scores[0] > 0.9999);
  CHECK(out.m[1] == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(std::abs(out.m[2]) < 1e-6);
}

TEST_CASE("memory read examples") {
  Fixture fx;
  std::vector<TokenId> k{4, 5, 6}, same{8, 8, 8};
  auto mem = make_memory(fx.table, k, same, Mask{1, 1, 1});
  auto out = attend_memory(fx.w_a, fx.hq, mem);
  CHECK(max_abs_diff(out.m.data(), row(fx.table, 8).data()) < 1e-12);

  std::vector<TokenId> v{7, 8, 9};
  auto mem2 = make_memory(fx.table, k, v, Mask{1, 1, 1});
  auto one_hot = Tensor::vector({0, 1, 0});
  CHECK(read_memory(mem2, one_hot).values() == row(fx.table, 8).values());
}

TEST_CASE("no attributes read a zero facts vector") {
  Fixture fx;
  auto empty = make_memory(fx.table, {}, {}, Mask{});
  auto out = attend_memory(fx.w_a, fx.hq, empty);
  CHECK_FALSE(out.scores.defined());
  CHECK(out.m.values() == std::vector<double>(kE, 0.0));

  std::vector<TokenId> pad{0, 0};
  auto padded = attend_memory(fx.w_a, fx.hq, make_memory(fx.table, pad, pad, Mask{0, 0}));
  CHECK(padded.m.values() == std::vector<double>(kE, 0.0));
}

TEST_CASE("scores are a distribution with zero padded slots") {
  Fixture fx;
  std::vector<TokenId> k{4, 5, 0}, v{7, 8, 0};
  auto out = attend_memory(fx.w_a, fx.hq, make_memory(fx.table, k, v, Mask{1, 1, 0}));
  CHECK(std::abs(testing::sum_of(out.scores) - 1.0) < 1e-9);
  CHECK(out.scores[2] == 0.0);
}

TEST_CASE("attribute permutation and duplication") {
  Fixture fx;
  std::vector<TokenId> k{4, 5, 6}, v{7, 8, 9};
  auto base = attend_memory(fx.w_a, fx.hq, make_memory(fx.table, k, v, Mask{1, 1, 1}));

  std::vector<TokenId> kp{6, 4, 5}, vp{9, 7, 8};
  auto perm = attend_memory(fx.w_a, fx.hq, make_memory(fx.table, kp, vp, Mask{1, 1, 1}));
  CHECK(std::abs(perm.scores[0] - base.scores[2]) < 1e-12);
  CHECK(std::abs(perm.scores[1] - base.scores[0]) < 1e-12);
  CHECK(max_abs_diff(perm.m.data(), base.m.data()) < 1e-12);

  std::vector<TokenId> one_k{4}, one_v{7}, dup_k{4, 4}, dup_v{7, 7};
  auto single = attend_memory(fx.w_a, fx.hq, make_memory(fx.table, one_k, one_v, Mask{1}));
  auto dup = attend_memory(fx.w_a, fx.hq, make_memory(fx.table, dup_k, dup_v, Mask{1, 1}));
  CHECK(max_abs_diff(dup.m.data(), single.m.data()) < 1e-9);
  CHECK(dup.scores[0] + dup.scores[1] == doctest::Approx(single.scores[0]).epsilon(1e-9));

  // Duplicating one attribute of three: the pair keeps the original mass
  // renormalized against the enlarged partition.
  std::vector<TokenId> k4{4, 5, 6, 4}, v4{7, 8, 9, 7};
  auto grown = attend_memory(fx.w_a, fx.hq, make_memory(fx.table, k4, v4, Mask{1, 1, 1, 1}));
  const double expected = 2 * base.scores[0] / (1 + base.scores[0]);
  CHECK(grown.scores[0] + grown.scores[3] == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("memory gradient matches finite differences") {
  Fixture fx;
  std::vector<TokenId> k{4, 5, 6}, v{7, 8, 9};
  auto f = [&] {
    auto m = attend_memory(fx.w_a, fx.hq, make_memory(fx.table, k, v, Mask{1, 1, 1})).m;
    return dot(m, m);
  };
  CHECK(check_grad(f, fx.w_a) < 1e-4);
  CHECK(check_grad(f, fx.hq) < 1e-4);
  CHECK(check_grad(f, fx.table) < 1e-4);
}
