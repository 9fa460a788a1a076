#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace paag {

using Shape = std::vector<std::size_t>;

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

class Tensor;

/// Receives the gradient flowing into an op's output together with the
/// output itself and returns one gradient per parent (undefined tensors are
/// allowed for parents that do not need one). Backward functions must be
/// written in terms of differentiable ops so that higher-order gradients work.
using BackwardFn =
    std::function<std::vector<Tensor>(const Tensor& grad, const Tensor& out)>;

namespace detail {
struct Engine;
struct Node {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // leaf accumulator, sized iff requires_grad
  std::vector<Tensor> parents;
  BackwardFn backward;
  const char* op = "leaf";
};
}  // namespace detail

/// Shared handle to a node of a define-by-run differentiation graph.
/// Copies alias the same storage; a default-constructed handle is undefined.
class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<double> data,
                     bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> v);

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->data.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return node_->data; }
  std::span<double> mutable_data() { return node_->data; }
  const std::vector<double>& values() const { return node_->data; }
  double item() const;
  double operator[](std::size_t i) const { return node_->data[i]; }
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return !node_->backward; }
  const char* op_name() const { return node_->op; }

  /// Accumulated gradient of a leaf; empty span when requires_grad is off.
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad; }
  void zero_grad();

  /// Copy of the values with no history.
  Tensor detach() const;

  const detail::Node* id() const noexcept { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor make_op(const char*, Shape, std::vector<double>,
                        std::vector<Tensor>, BackwardFn);
  friend struct detail::Engine;
};

/// Builds an op result. History is recorded only when grad mode is on and
/// at least one parent requires grad.
Tensor make_op(const char* name, Shape shape, std::vector<double> data,
               std::vector<Tensor> parents, BackwardFn fn);

/// Thread-local switch for graph recording.
class GradMode {
 public:
  static bool enabled() noexcept;
  static void set(bool on) noexcept;
};

class NoGradGuard {
 public:
  NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set(false); }
  ~NoGradGuard() { GradMode::set(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

/// Reverse-mode accumulation of d(loss)/d(leaf) into every reachable leaf
/// with requires_grad. Repeated calls accumulate.
void backward(const Tensor& loss);

/// Gradients of a scalar output with respect to `inputs`, returned rather
/// than accumulated. Entries for unreachable inputs are undefined. With
/// create_graph the results carry history and can be differentiated again.
std::vector<Tensor> grad(const Tensor& output, std::span<const Tensor> inputs,
                         bool create_graph = false);

/// ||d output / d wrt||_2 as a differentiable scalar (double-backward).
Tensor grad_norm_of(const Tensor& output, const Tensor& wrt);

}  // namespace paag
