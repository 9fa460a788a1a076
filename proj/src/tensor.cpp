#include "paag/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "paag/ops.hpp"

namespace paag {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

bool GradMode::enabled() noexcept { return g_grad_enabled; }
void GradMode::set(bool on) noexcept { g_grad_enabled = on; }

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape.empty()) throw DimensionError("tensor shape must have rank >= 1");
  for (auto d : shape)
    if (d == 0)
      throw DimensionError("tensor extents must be positive, got " +
                           shape_str(shape));
  if (shape_numel(shape) != data.size())
    throw DimensionError("shape " + shape_str(shape) + " does not hold " +
                         std::to_string(data.size()) + " values");
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  if (requires_grad) n->grad.assign(n->data.size(), 0.0);
  return Tensor(std::move(n));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value) {
  auto n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

Tensor Tensor::vector(std::vector<double> v) {
  auto n = v.size();
  return from({n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> v) {
  return from({rows, cols}, std::move(v));
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw DimensionError("rows() on " + shape_str(shape()));
  return node_->shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw DimensionError("cols() on " + shape_str(shape()));
  return node_->shape[1];
}

double Tensor::item() const {
  if (size() != 1)
    throw DimensionError("item() on non-scalar " + shape_str(shape()));
  return node_->data[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return node_->data[r * cols() + c];
}

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return from(node_->shape, node_->data); }

Tensor make_op(const char* name, Shape shape, std::vector<double> data,
               std::vector<Tensor> parents, BackwardFn fn) {
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->op = name;
  if (GradMode::enabled()) {
    bool any = std::any_of(parents.begin(), parents.end(), [](const Tensor& p) {
      return p.defined() && p.requires_grad();
    });
    if (any) {
      n->requires_grad = true;
      n->parents = std::move(parents);
      n->backward = std::move(fn);
    }
  }
  return Tensor(std::move(n));
}

namespace detail {

struct Engine {
  using NodePtr = std::shared_ptr<Node>;

  // Nodes requiring grad reachable from root, output first.
  static std::vector<NodePtr> reverse_topo(const NodePtr& root) {
    std::vector<NodePtr> order;
    std::unordered_set<const Node*> seen{root.get()};
    std::vector<std::pair<NodePtr, std::size_t>> stack{{root, 0}};
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        const Tensor& p = node->parents[next++];
        if (p.defined() && p.requires_grad() && seen.insert(p.id()).second)
          stack.emplace_back(p.node_, 0);
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
    std::reverse(order.begin(), order.end());
    return order;
  }

  // Propagates d(output)/d(node) for every node; returns the map.
  static std::unordered_map<const Node*, Tensor> run(const Tensor& output,
                                                     bool create_graph) {
    if (!output.defined()) throw ContractError("backward on undefined tensor");
    if (output.size() != 1)
      throw ContractError("backward requires a scalar output, got " +
                          shape_str(output.shape()));
    std::unordered_map<const Node*, Tensor> grads;
    if (!output.requires_grad()) return grads;

    bool prev = GradMode::enabled();
    GradMode::set(create_graph);
    grads[output.id()] = Tensor::full(output.shape(), 1.0);
    for (const auto& node : reverse_topo(output.node_)) {
      auto it = grads.find(node.get());
      if (it == grads.end() || !node->backward) continue;
      Tensor g = it->second;
      Tensor out(node);
      std::vector<Tensor> pg;
      try {
        pg = node->backward(g, out);
      } catch (...) {
        GradMode::set(prev);
        throw;
      }
      for (std::size_t i = 0; i < node->parents.size() && i < pg.size(); ++i) {
        const Tensor& p = node->parents[i];
        if (!p.defined() || !p.requires_grad() || !pg[i].defined()) continue;
        if (pg[i].shape() != p.shape()) {
          GradMode::set(prev);
          throw DimensionError(std::string("gradient of op '") + node->op +
                               "' has shape " + shape_str(pg[i].shape()) +
                               ", parent is " + shape_str(p.shape()));
        }
        auto [slot, fresh] = grads.try_emplace(p.id(), pg[i]);
        if (!fresh) slot->second = add(slot->second, pg[i]);
      }
    }
    GradMode::set(prev);
    return grads;
  }

  static void accumulate(const Tensor& loss) {
    auto grads = run(loss, false);
    for (auto& [id, g] : grads) {
      auto* node = const_cast<Node*>(id);
      if (node->backward || !node->requires_grad) continue;
      for (std::size_t i = 0; i < node->grad.size(); ++i)
        node->grad[i] += g[i];
    }
  }
};

}  // namespace detail

void backward(const Tensor& loss) { detail::Engine::accumulate(loss); }

std::vector<Tensor> grad(const Tensor& output, std::span<const Tensor> inputs,
                         bool create_graph) {
  auto grads = detail::Engine::run(output, create_graph);
  std::vector<Tensor> out;
  out.reserve(inputs.size());
  for (const auto& in : inputs) {
    auto it = grads.find(in.id());
    out.push_back(it == grads.end() ? Tensor() : it->second);
  }
  return out;
}

Tensor grad_norm_of(const Tensor& output, const Tensor& wrt) {
  Tensor g = grad(output, std::span<const Tensor>(&wrt, 1), true).front();
  if (!g.defined())
    throw ContractError("grad_norm_of: output does not depend on the input");
  return sqrt(sum(mul(g, g)));
}

}  // namespace paag
