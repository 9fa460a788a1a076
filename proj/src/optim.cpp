#include "paag/optim.hpp"

#include <cmath>

namespace paag {

void adagrad_step(ParamStore& params, AdagradState& state) {
  for (auto& [name, p] : params.entries()) {
    if (!p.requires_grad() || p.grad().size() != p.size())
      throw ContractError("adagrad_step: parameter '" + name +
                          "' has no gradient");
  }
  for (auto& [name, p] : params.entries()) {
    auto& acc = state.accumulators[name];
    if (acc.empty()) acc.assign(p.size(), 0.0);
    auto g = p.mutable_grad();
    auto w = p.mutable_data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (g[i] == 0.0) continue;
      acc[i] += g[i] * g[i];
      w[i] -= state.learning_rate * g[i] / (std::sqrt(acc[i]) + state.epsilon);
    }
    p.zero_grad();
  }
}

double clip_grad_norm(ParamStore& params, double max_norm) {
  const double norm = params.grad_norm();
  if (norm > max_norm && norm > 0) {
    const double s = max_norm / norm;
    for (auto& [_, p] : params.entries())
      for (double& g : p.mutable_grad()) g *= s;
  }
  return norm;
}

}  // namespace paag
