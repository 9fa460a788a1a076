#include "paag/kvmn.hpp"

#include <algorithm>

namespace paag::nn {

std::size_t AttributeMemory::real_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
}

AttributeMemory make_memory(const Tensor& embedding, std::span<const TokenId> keys,
                            std::span<const TokenId> values, const Mask& mask) {
  if (keys.size() != values.size() || keys.size() != mask.size())
    throw DimensionError("make_memory: " + std::to_string(keys.size()) + " keys, " +
                         std::to_string(values.size()) + " values, " +
                         std::to_string(mask.size()) + " mask entries");
  AttributeMemory mem;
  mem.mask = mask;
  if (!keys.empty()) {
    mem.keys = embed(embedding, keys);
    mem.values = embed(embedding, values);
  }
  return mem;
}

Tensor key_match(const Tensor& w_a, const Tensor& q_final, const AttributeMemory& memory) {
  if (memory.real_count() == 0) return {};
  return softmax(matmul(memory.keys, matmul(q_final, w_a)), memory.mask);
}

Tensor read_memory(const AttributeMemory& memory, const Tensor& scores) {
  return matmul(scores, memory.values);
}

MemoryReadout attend_memory(const Tensor& w_a, const Tensor& q_final,
                            const AttributeMemory& memory) {
  MemoryReadout out;
  out.scores = key_match(w_a, q_final, memory);
  out.m = out.scores.defined() ? read_memory(memory, out.scores)
                               : Tensor::zeros({w_a.cols()});
  return out;
}

}  // namespace paag::nn
