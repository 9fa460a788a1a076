#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "paag/tensor.hpp"

namespace paag {

/// Boolean mask stored as bytes (1 = real position).
using Mask = std::vector<std::uint8_t>;

// Element-wise binary ops. `add` additionally accepts a rank-1 right operand
// whose extent equals the trailing dimension of a rank-2 left operand (bias).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
/// a * s where s is a one-element tensor.
Tensor scale_by(const Tensor& a, const Tensor& s);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
/// Throws DomainError on non-positive input.
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
/// log(1 + exp(a)), evaluated without overflow.
Tensor softplus(const Tensor& a);

enum class Elementwise { add, mul, tanh, sigmoid, relu, exp, log, neg };
Tensor elementwise(Elementwise kind, std::span<const Tensor> operands);

/// Supports [m x k]*[k x n], [m x k]*[k] and [k]*[k x n].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& m);
Tensor outer(const Tensor& a, const Tensor& b);

Tensor sum(const Tensor& a);
Tensor dot(const Tensor& a, const Tensor& b);
/// Broadcasts a one-element tensor to `shape`.
Tensor expand(const Tensor& s, const Shape& shape);
/// [m x n] -> [n]
Tensor sum_rows(const Tensor& m);
/// [n] -> [m x n]
Tensor tile_rows(const Tensor& v, std::size_t m);
/// Column-wise max over rows, [m x n] -> [n]; ties go to the lower row.
Tensor max_rows(const Tensor& m);

Tensor reshape(const Tensor& a, const Shape& shape);
Tensor rows_slice(const Tensor& m, std::size_t begin, std::size_t count);
Tensor pad_rows(const Tensor& m, std::size_t begin, std::size_t total);
Tensor row(const Tensor& m, std::size_t i);
Tensor stack_rows(std::span<const Tensor> rows);
Tensor concat(std::span<const Tensor> parts);
Tensor segment(const Tensor& v, std::size_t offset, std::size_t len);
Tensor pad_segment(const Tensor& v, std::size_t offset, std::size_t total);

/// out[i] = v[idx[i]]
Tensor index_select(const Tensor& v, std::span<const std::size_t> idx);
/// out = zeros(size); out[idx[i]] += v[i]
Tensor index_add(const Tensor& v, std::span<const std::size_t> idx,
                 std::size_t size);
/// Row lookup; rows whose id equals `skip` are zero and receive no gradient.
Tensor gather_rows(const Tensor& m, std::span<const std::size_t> ids,
                   long skip = -1);
Tensor scatter_rows(const Tensor& g, std::span<const std::size_t> ids,
                    std::size_t nrows, long skip = -1);

/// Softmax over a rank-1 tensor with max-subtraction. Masked positions are
/// exactly zero. Throws ContractError when every position is masked.
Tensor softmax(const Tensor& x);
Tensor softmax(const Tensor& x, const Mask& mask);

}  // namespace paag
