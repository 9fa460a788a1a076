#pragma once

#include <string>
#include <utility>
#include <vector>

#include "paag/rng.hpp"
#include "paag/tensor.hpp"

namespace paag {

/// Named trainable tensors in insertion order.
class ParamStore {
 public:
  static constexpr double kInitScale = 0.08;

  /// Registers a parameter initialized uniformly in [-0.08, 0.08].
  Tensor add(const std::string& name, Shape shape, Rng& rng);
  Tensor add(const std::string& name, Tensor value);

  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  bool contains(const std::string& name) const;

  std::vector<std::pair<std::string, Tensor>>& entries() { return entries_; }
  const std::vector<std::pair<std::string, Tensor>>& entries() const {
    return entries_;
  }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t scalar_count() const;

  void zero_grad();
  /// L2 norm over every gradient entry.
  double grad_norm() const;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

}  // namespace paag
