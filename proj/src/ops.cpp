#include "paag/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace paag {

namespace {

using Vec = std::vector<double>;

[[noreturn]] void shape_mismatch(const char* op, const Tensor& a,
                                 const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " +
                       shape_str(a.shape()) + " and " + shape_str(b.shape()));
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_mismatch(op, a, b);
}

void require_rank(const char* op, const Tensor& a, std::size_t r) {
  if (a.rank() != r)
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(r) + ", got " + shape_str(a.shape()));
}

bool is_bias(const Tensor& a, const Tensor& b) {
  return a.rank() == 2 && b.rank() == 1 && a.shape()[1] == b.shape()[0];
}

template <typename F>
Vec map(const Tensor& a, F f) {
  Vec out(a.size());
  auto d = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(d[i]);
  return out;
}

template <typename F>
Vec zip(const Tensor& a, const Tensor& b, F f) {
  Vec out(a.size());
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i], y[i]);
  return out;
}

// 1 - x*x and x*(1-x) as differentiable expressions of the op output.
Tensor one_minus_square(const Tensor& x) {
  return add_scalar(neg(mul(x, x)), 1.0);
}

Tensor sigmoid_slope(const Tensor& s) {
  return mul(s, add_scalar(neg(s), 1.0));
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) {
    return make_op("add", a.shape(), zip(a, b, std::plus<>()), {a, b},
                   [](const Tensor& g, const Tensor&) {
                     return std::vector<Tensor>{g, g};
                   });
  }
  if (!is_bias(a, b)) shape_mismatch("add", a, b);
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  Vec out(a.values());
  auto bd = b.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bd[j];
  return make_op("add_bias", a.shape(), std::move(out), {a, b},
                 [](const Tensor& g, const Tensor&) {
                   return std::vector<Tensor>{g, sum_rows(g)};
                 });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  return make_op("sub", a.shape(), zip(a, b, std::minus<>()), {a, b},
                 [](const Tensor& g, const Tensor&) {
                   return std::vector<Tensor>{g, neg(g)};
                 });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  return make_op("mul", a.shape(), zip(a, b, std::multiplies<>()), {a, b},
                 [a, b](const Tensor& g, const Tensor&) {
                   return std::vector<Tensor>{mul(g, b), mul(g, a)};
                 });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same("div", a, b);
  return make_op("div", a.shape(), zip(a, b, std::divides<>()), {a, b},
                 [a, b](const Tensor& g, const Tensor& out) {
                   Tensor ga = div(g, b);
                   return std::vector<Tensor>{ga, neg(mul(ga, out))};
                 });
}

Tensor neg(const Tensor& a) {
  return make_op("neg", a.shape(), map(a, [](double x) { return -x; }), {a},
                 [](const Tensor& g, const Tensor&) {
                   return std::vector<Tensor>{neg(g)};
                 });
}

Tensor scale(const Tensor& a, double c) {
  return make_op("scale", a.shape(), map(a, [c](double x) { return c * x; }),
                 {a}, [c](const Tensor& g, const Tensor&) {
                   return std::vector<Tensor>{scale(g, c)};
                 });
}

Tensor add_scalar(const Tensor& a, double c) {
  return make_op("add_scalar", a.shape(),
                 map(a, [c](double x) { return x + c; }), {a},
                 [](const Tensor& g, const Tensor&) {
                   return std::vector<Tensor>{g};
                 });
}

Tensor scale_by(const Tensor& a, const Tensor& s) {
  if (s.size() != 1) shape_mismatch("scale_by", a, s);
  const double c = s[0];
  return make_op("scale_by", a.shape(), map(a, [c](double x) { return c * x; }),
                 {a, s}, [a, s](const Tensor& g, const Tensor&) {
                   return std::vector<Tensor>{
                       scale_by(g, s), reshape(sum(mul(g, a)), s.shape())};
                 });
}

Tensor tanh(const Tensor& a) {
  return make_op("tanh", a.shape(), map(a, [](double x) { return std::tanh(x); }),
                 {a}, [](const Tensor& g, const Tensor& out) {
                   return std::vector<Tensor>{mul(g, one_minus_square(out))};
                 });
}

Tensor sigmoid(const Tensor& a) {
  return make_op("sigmoid", a.shape(), map(a, stable_sigmoid), {a},
                 [](const Tensor& g, const Tensor& out) {
                   return std::vector<Tensor>{mul(g, sigmoid_slope(out))};
                 });
}

Tensor relu(const Tensor& a) {
  return make_op("relu", a.shape(),
                 map(a, [](double x) { return x > 0 ? x : 0.0; }), {a},
                 [a](const Tensor& g, const Tensor&) {
                   Tensor step = Tensor::from(
                       a.shape(), map(a, [](double x) { return x > 0 ? 1.0 : 0.0; }));
                   return std::vector<Tensor>{mul(g, step)};
                 });
}

Tensor exp(const Tensor& a) {
  return make_op("exp", a.shape(), map(a, [](double x) { return std::exp(x); }),
                 {a}, [](const Tensor& g, const Tensor& out) {
                   return std::vector<Tensor>{mul(g, out)};
                 });
}

Tensor log(const Tensor& a) {
  for (double x : a.data())
    if (x <= 0)
      throw DomainError("log of non-positive value " + std::to_string(x));
  return make_op("log", a.shape(), map(a, [](double x) { return std::log(x); }),
                 {a}, [a](const Tensor& g, const Tensor&) {
                   return std::vector<Tensor>{div(g, a)};
                 });
}

Tensor sqrt(const Tensor& a) {
  for (double x : a.data())
    if (x < 0) throw DomainError("sqrt of negative value " + std::to_string(x));
  return make_op("sqrt", a.shape(), map(a, [](double x) { return std::sqrt(x); }),
                 {a}, [](const Tensor& g, const Tensor& out) {
                   return std::vector<Tensor>{div(scale(g, 0.5), out)};
                 });
}

Tensor softplus(const Tensor& a) {
  return make_op("softplus", a.shape(),
                 map(a,
                     [](double x) {
                       return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
                     }),
                 {a}, [a](const Tensor& g, const Tensor&) {
                   return std::vector<Tensor>{mul(g, sigmoid(a))};
                 });
}

Tensor elementwise(Elementwise kind, std::span<const Tensor> operands) {
  auto need = [&](std::size_t n) {
    if (operands.size() != n)
      throw ContractError("elementwise: expected " + std::to_string(n) +
                          " operands, got " + std::to_string(operands.size()));
  };
  switch (kind) {
    case Elementwise::add: need(2); return add(operands[0], operands[1]);
    case Elementwise::mul: need(2); return mul(operands[0], operands[1]);
    case Elementwise::tanh: need(1); return tanh(operands[0]);
    case Elementwise::sigmoid: need(1); return sigmoid(operands[0]);
    case Elementwise::relu: need(1); return relu(operands[0]);
    case Elementwise::exp: need(1); return exp(operands[0]);
    case Elementwise::log: need(1); return log(operands[0]);
    case Elementwise::neg: need(1); return neg(operands[0]);
  }
  throw ContractError("elementwise: unknown kind");
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() == 2 && b.rank() == 2) {
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    if (b.shape()[0] != k) shape_mismatch("matmul", a, b);
    Vec out(m * n, 0.0);
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double v = x[i * k + p];
        if (v == 0.0) continue;
        const double* yr = &y[p * n];
        double* o = &out[i * n];
        for (std::size_t j = 0; j < n; ++j) o[j] += v * yr[j];
      }
    return make_op("matmul", {m, n}, std::move(out), {a, b},
                   [a, b](const Tensor& g, const Tensor&) {
                     return std::vector<Tensor>{matmul(g, transpose(b)),
                                                matmul(transpose(a), g)};
                   });
  }
  if (a.rank() == 2 && b.rank() == 1) {
    const std::size_t m = a.shape()[0], k = a.shape()[1];
    if (b.shape()[0] != k) shape_mismatch("matmul", a, b);
    Vec out(m, 0.0);
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      const double* xr = &x[i * k];
      for (std::size_t p = 0; p < k; ++p) s += xr[p] * y[p];
      out[i] = s;
    }
    return make_op("matvec", {m}, std::move(out), {a, b},
                   [a, b](const Tensor& g, const Tensor&) {
                     return std::vector<Tensor>{outer(g, b), matmul(g, a)};
                   });
  }
  if (a.rank() == 1 && b.rank() == 2) {
    const std::size_t k = b.shape()[0], n = b.shape()[1];
    if (a.shape()[0] != k) shape_mismatch("matmul", a, b);
    Vec out(n, 0.0);
    auto x = a.data();
    auto y = b.data();
    for (std::size_t p = 0; p < k; ++p) {
      const double v = x[p];
      if (v == 0.0) continue;
      const double* yr = &y[p * n];
      for (std::size_t j = 0; j < n; ++j) out[j] += v * yr[j];
    }
    return make_op("vecmat", {n}, std::move(out), {a, b},
                   [a, b](const Tensor& g, const Tensor&) {
                     return std::vector<Tensor>{matmul(b, g), outer(a, g)};
                   });
  }
  shape_mismatch("matmul", a, b);
}

Tensor transpose(const Tensor& m) {
  require_rank("transpose", m, 2);
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  Vec out(r * c);
  auto d = m.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = d[i * c + j];
  return make_op("transpose", {c, r}, std::move(out), {m},
                 [](const Tensor& g, const Tensor&) {
                   return std::vector<Tensor>{transpose(g)};
                 });
}

Tensor outer(const Tensor& a, const Tensor& b) {
  require_rank("outer", a, 1);
  require_rank("outer", b, 1);
  const std::size_t m = a.size(), n = b.size();
  Vec out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a[i] * b[j];
  return make_op("outer", {m, n}, std::move(out), {a, b},
                 [a, b](const Tensor& g, const Tensor&) {
                   return std::vector<Tensor>{matmul(g, b), matmul(a, g)};
                 });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  return make_op("sum", {1}, {s}, {a}, [a](const Tensor& g, const Tensor&) {
    return std::vector<Tensor>{expand(g, a.shape())};
  });
}

Tensor dot(const Tensor& a, const Tensor& b) { return sum(mul(a, b)); }

Tensor expand(const Tensor& s, const Shape& shape) {
  if (s.size() != 1)
    throw DimensionError("expand: source must have one element, got " +
                         shape_str(s.shape()));
  return make_op("expand", shape, Vec(shape_numel(shape), s[0]), {s},
                 [s](const Tensor& g, const Tensor&) {
                   return std::vector<Tensor>{reshape(sum(g), s.shape())};
                 });
}

Tensor sum_rows(const Tensor& m) {
  require_rank("sum_rows", m, 2);
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  Vec out(c, 0.0);
  auto d = m.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += d[i * c + j];
  return make_op("sum_rows", {c}, std::move(out), {m},
                 [r](const Tensor& g, const Tensor&) {
                   return std::vector<Tensor>{tile_rows(g, r)};
                 });
}

Tensor tile_rows(const Tensor& v, std::size_t m) {
  require_rank("tile_rows", v, 1);
  const std::size_t n = v.size();
  Vec out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    std::copy(v.data().begin(), v.data().end(), out.begin() + i * n);
  return make_op("tile_rows", {m, n}, std::move(out), {v},
                 [](const Tensor& g, const Tensor&) {
                   return std::vector<Tensor>{sum_rows(g)};
                 });
}

Tensor max_rows(const Tensor& m) {
  require_rank("max_rows", m, 2);
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  Vec out(c);
  Vec onehot(r * c, 0.0);
  auto d = m.data();
  for (std::size_t j = 0; j < c; ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < r; ++i)
      if (d[i * c + j] > d[best * c + j]) best = i;
    out[j] = d[best * c + j];
    onehot[best * c + j] = 1.0;
  }
  Tensor sel = Tensor::from({r, c}, std::move(onehot));
  return make_op("max_rows", {c}, std::move(out), {m},
                 [sel, r](const Tensor& g, const Tensor&) {
                   return std::vector<Tensor>{mul(tile_rows(g, r), sel)};
                 });
}

Tensor reshape(const Tensor& a, const Shape& shape) {
  if (shape_numel(shape) != a.size())
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) +
                         " as " + shape_str(shape));
  return make_op("reshape", shape, a.values(), {a},
                 [a](const Tensor& g, const Tensor&) {
                   return std::vector<Tensor>{reshape(g, a.shape())};
                 });
}

Tensor rows_slice(const Tensor& m, std::size_t begin, std::size_t count) {
  require_rank("rows_slice", m, 2);
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  if (count == 0 || begin + count > r)
    throw DimensionError("rows_slice: rows [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of " +
                         shape_str(m.shape()));
  auto d = m.data();
  Vec out(d.begin() + begin * c, d.begin() + (begin + count) * c);
  return make_op("rows_slice", {count, c}, std::move(out), {m},
                 [begin, r](const Tensor& g, const Tensor&) {
                   return std::vector<Tensor>{pad_rows(g, begin, r)};
                 });
}

Tensor pad_rows(const Tensor& m, std::size_t begin, std::size_t total) {
  require_rank("pad_rows", m, 2);
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  if (begin + r > total)
    throw DimensionError("pad_rows: " + shape_str(m.shape()) +
                         " does not fit at row " + std::to_string(begin) +
                         " of " + std::to_string(total));
  Vec out(total * c, 0.0);
  std::copy(m.data().begin(), m.data().end(), out.begin() + begin * c);
  return make_op("pad_rows", {total, c}, std::move(out), {m},
                 [begin, r](const Tensor& g, const Tensor&) {
                   return std::vector<Tensor>{rows_slice(g, begin, r)};
                 });
}

Tensor row(const Tensor& m, std::size_t i) {
  require_rank("row", m, 2);
  return reshape(rows_slice(m, i, 1), {m.shape()[1]});
}

Tensor stack_rows(std::span<const Tensor> rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no rows");
  const std::size_t n = rows.front().size();
  Vec out;
  out.reserve(rows.size() * n);
  for (const auto& r : rows) {
    if (r.rank() != 1 || r.size() != n) shape_mismatch("stack_rows", rows.front(), r);
    out.insert(out.end(), r.data().begin(), r.data().end());
  }
  const std::size_t m = rows.size();
  return make_op("stack_rows", {m, n}, std::move(out),
                 std::vector<Tensor>(rows.begin(), rows.end()),
                 [m](const Tensor& g, const Tensor&) {
                   std::vector<Tensor> gs;
                   gs.reserve(m);
                   for (std::size_t i = 0; i < m; ++i) gs.push_back(row(g, i));
                   return gs;
                 });
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat: no parts");
  Vec out;
  std::vector<std::size_t> offsets, lens;
  for (const auto& p : parts) {
    require_rank("concat", p, 1);
    offsets.push_back(out.size());
    lens.push_back(p.size());
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  const std::size_t n = out.size();
  return make_op("concat", {n}, std::move(out),
                 std::vector<Tensor>(parts.begin(), parts.end()),
                 [offsets, lens](const Tensor& g, const Tensor&) {
                   std::vector<Tensor> gs;
                   gs.reserve(offsets.size());
                   for (std::size_t i = 0; i < offsets.size(); ++i)
                     gs.push_back(segment(g, offsets[i], lens[i]));
                   return gs;
                 });
}

Tensor segment(const Tensor& v, std::size_t offset, std::size_t len) {
  require_rank("segment", v, 1);
  if (len == 0 || offset + len > v.size())
    throw DimensionError("segment [" + std::to_string(offset) + ", " +
                         std::to_string(offset + len) + ") out of " +
                         shape_str(v.shape()));
  Vec out(v.data().begin() + offset, v.data().begin() + offset + len);
  const std::size_t total = v.size();
  return make_op("segment", {len}, std::move(out), {v},
                 [offset, total](const Tensor& g, const Tensor&) {
                   return std::vector<Tensor>{pad_segment(g, offset, total)};
                 });
}

Tensor pad_segment(const Tensor& v, std::size_t offset, std::size_t total) {
  require_rank("pad_segment", v, 1);
  const std::size_t len = v.size();
  if (offset + len > total)
    throw DimensionError("pad_segment: length " + std::to_string(len) +
                         " at " + std::to_string(offset) + " exceeds " +
                         std::to_string(total));
  Vec out(total, 0.0);
  std::copy(v.data().begin(), v.data().end(), out.begin() + offset);
  return make_op("pad_segment", {total}, std::move(out), {v},
                 [offset, len](const Tensor& g, const Tensor&) {
                   return std::vector<Tensor>{segment(g, offset, len)};
                 });
}

Tensor index_select(const Tensor& v, std::span<const std::size_t> idx) {
  require_rank("index_select", v, 1);
  if (idx.empty()) throw DimensionError("index_select: empty index");
  Vec out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= v.size())
      throw DimensionError("index_select: index " + std::to_string(idx[i]) +
                           " out of " + shape_str(v.shape()));
    out[i] = v[idx[i]];
  }
  std::vector<std::size_t> ix(idx.begin(), idx.end());
  const std::size_t n = v.size();
  return make_op("index_select", {ix.size()}, std::move(out), {v},
                 [ix, n](const Tensor& g, const Tensor&) {
                   return std::vector<Tensor>{index_add(g, ix, n)};
                 });
}

Tensor index_add(const Tensor& v, std::span<const std::size_t> idx,
                 std::size_t size) {
  require_rank("index_add", v, 1);
  if (idx.size() != v.size())
    throw DimensionError("index_add: " + std::to_string(idx.size()) +
                         " indices for " + shape_str(v.shape()));
  Vec out(size, 0.0);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= size)
      throw DimensionError("index_add: index " + std::to_string(idx[i]) +
                           " out of " + std::to_string(size));
    out[idx[i]] += v[i];
  }
  std::vector<std::size_t> ix(idx.begin(), idx.end());
  return make_op("index_add", {size}, std::move(out), {v},
                 [ix](const Tensor& g, const Tensor&) {
                   return std::vector<Tensor>{index_select(g, ix)};
                 });
}

Tensor gather_rows(const Tensor& m, std::span<const std::size_t> ids,
                   long skip) {
  require_rank("gather_rows", m, 2);
  if (ids.empty()) throw DimensionError("gather_rows: empty ids");
  const std::size_t r = m.shape()[0], c = m.shape()[1];
  Vec out(ids.size() * c, 0.0);
  auto d = m.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= r)
      throw DimensionError("gather_rows: id " + std::to_string(ids[i]) +
                           " out of " + shape_str(m.shape()));
    if (static_cast<long>(ids[i]) == skip) continue;
    std::copy(d.begin() + ids[i] * c, d.begin() + (ids[i] + 1) * c,
              out.begin() + i * c);
  }
  std::vector<std::size_t> ix(ids.begin(), ids.end());
  return make_op("gather_rows", {ids.size(), c}, std::move(out), {m},
                 [ix, r, skip](const Tensor& g, const Tensor&) {
                   return std::vector<Tensor>{scatter_rows(g, ix, r, skip)};
                 });
}

Tensor scatter_rows(const Tensor& g, std::span<const std::size_t> ids,
                    std::size_t nrows, long skip) {
  require_rank("scatter_rows", g, 2);
  if (ids.size() != g.shape()[0])
    throw DimensionError("scatter_rows: " + std::to_string(ids.size()) +
                         " ids for " + shape_str(g.shape()));
  const std::size_t c = g.shape()[1];
  Vec out(nrows * c, 0.0);
  auto d = g.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= nrows)
      throw DimensionError("scatter_rows: id out of range");
    if (static_cast<long>(ids[i]) == skip) continue;
    for (std::size_t j = 0; j < c; ++j) out[ids[i] * c + j] += d[i * c + j];
  }
  std::vector<std::size_t> ix(ids.begin(), ids.end());
  return make_op("scatter_rows", {nrows, c}, std::move(out), {g},
                 [ix, skip](const Tensor& gg, const Tensor&) {
                   return std::vector<Tensor>{gather_rows(gg, ix, skip)};
                 });
}

Tensor softmax(const Tensor& x) { return softmax(x, Mask(x.size(), 1)); }

Tensor softmax(const Tensor& x, const Mask& mask) {
  require_rank("softmax", x, 1);
  if (mask.size() != x.size())
    throw DimensionError("softmax: mask of length " +
                         std::to_string(mask.size()) + " for " +
                         shape_str(x.shape()));
  if (std::find(mask.begin(), mask.end(), 1) == mask.end())
    throw ContractError("softmax: every position is masked");
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i)
    if (mask[i]) mx = std::isnan(x[i]) || std::isnan(mx) ? std::nan("") : std::max(mx, x[i]);
  Vec out(x.size(), 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (mask[i]) z += (out[i] = std::exp(x[i] - mx));
  for (double& v : out) v /= z;
  const std::size_t n = x.size();
  // d y_i / d x_j = y_i (delta_ij - y_j)
  return make_op("softmax", {n}, std::move(out), {x},
                 [n](const Tensor& g, const Tensor& y) {
                   Tensor inner = expand(sum(mul(g, y)), {n});
                   return std::vector<Tensor>{mul(y, sub(g, inner))};
                 });
}

}  // namespace paag
