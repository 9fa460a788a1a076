#pragma once

#include <span>

#include "paag/encoders.hpp"

namespace paag::nn {

/// Attribute keys and values looked up in the shared embedding.
struct AttributeMemory {
  Tensor keys;    // [T_a x E]
  Tensor values;  // [T_a x E]
  Mask mask;
  std::size_t real_count() const;
};

AttributeMemory make_memory(const Tensor& embedding, std::span<const TokenId> keys,
                            std::span<const TokenId> values, const Mask& mask);

struct MemoryReadout {
  Tensor scores;  // [T_a]; undefined when no attribute is real
  Tensor m;       // [E]
};

/// P(a_i) = masked softmax_i(e(k_i) . (h^q W_a)) with W_a of shape [2H x E].
/// Returns an undefined score tensor when there is no real attribute.
Tensor key_match(const Tensor& w_a, const Tensor& q_final, const AttributeMemory& memory);
/// m = sum_i P(a_i) e(v_i).
Tensor read_memory(const AttributeMemory& memory, const Tensor& scores);
/// key_match followed by read_memory; m = 0 for attribute-free products.
MemoryReadout attend_memory(const Tensor& w_a, const Tensor& q_final,
                            const AttributeMemory& memory);

}  // namespace paag::nn
