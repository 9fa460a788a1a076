#include "paag/params.hpp"

#include <algorithm>
#include <cmath>

namespace paag {

Tensor ParamStore::add(const std::string& name, Shape shape, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(-kInitScale, kInitScale);
  return add(name, Tensor::from(std::move(shape), std::move(v), true));
}

Tensor ParamStore::add(const std::string& name, Tensor value) {
  if (contains(name)) throw ContractError("duplicate parameter '" + name + "'");
  if (!value.requires_grad())
    value = Tensor::from(value.shape(), value.values(), true);
  entries_.emplace_back(name, std::move(value));
  return entries_.back().second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return t;
  throw ContractError("unknown parameter '" + name + "'");
}

Tensor& ParamStore::get(const std::string& name) {
  return const_cast<Tensor&>(std::as_const(*this).get(name));
}

bool ParamStore::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == name; });
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : entries_) n += t.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, t] : entries_) t.zero_grad();
}

double ParamStore::grad_norm() const {
  double s = 0.0;
  for (const auto& [_, t] : entries_)
    for (double g : t.grad()) s += g * g;
  return std::sqrt(s);
}

}  // namespace paag
