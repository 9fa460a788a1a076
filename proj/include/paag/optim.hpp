#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "paag/params.hpp"

namespace paag {

struct AdagradState {
  double learning_rate = 0.1;
  double epsilon = 1e-8;
  std::unordered_map<std::string, std::vector<double>> accumulators;
};

/// accumulator += g^2; p -= lr * g / (sqrt(accumulator) + eps); grads are
/// zeroed afterwards. Throws ContractError for a parameter without a grad.
void adagrad_step(ParamStore& params, AdagradState& state);

/// Rescales gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(ParamStore& params, double max_norm);

}  // namespace paag
