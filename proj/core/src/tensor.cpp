#include "tst/tensor.hpp"

#include <functional>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "tst/errors.hpp"

namespace tst {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data, bool requires_grad) {
  for (auto e : shape)
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + to_string(shape));
  if (numel(shape) != data.size())
    throw DimensionError("shape " + to_string(shape) + " does not match " +
                         std::to_string(data.size()) + " values");
  node_ = std::make_shared<detail::Node<T>>();
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T{0}, requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  auto n = numel(shape);
  return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <typename T>
const Shape& Tensor<T>::shape() const {
  if (!node_) throw UsageError("use of an undefined tensor");
  return node_->shape;
}

template <typename T>
std::size_t Tensor<T>::size() const {
  return node_ ? node_->data.size() : 0;
}

template <typename T>
std::size_t Tensor<T>::extent(int axis) const {
  const auto& s = shape();
  int r = static_cast<int>(s.size());
  int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r)
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + to_string(s));
  return s[static_cast<std::size_t>(a)];
}

template <typename T>
std::span<const T> Tensor<T>::data() const {
  if (!node_) return {};
  return node_->data;
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  if (!node_) return {};
  return node_->data;
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1)
    throw UsageError("item() requires a single-element tensor, shape is " + to_string(shape()));
  return node_->data[0];
}

template <typename T>
bool Tensor<T>::requires_grad() const {
  return node_ && node_->requires_grad;
}

template <typename T>
void Tensor<T>::set_requires_grad(bool on) {
  if (!node_) throw UsageError("use of an undefined tensor");
  node_->requires_grad = on;
}

template <typename T>
bool Tensor<T>::has_grad() const {
  return node_ && node_->grad.size() == node_->data.size() && !node_->data.empty();
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  if (!has_grad()) return {};
  return node_->grad;
}

template <typename T>
std::span<T> Tensor<T>::mutable_grad() {
  if (!node_) return {};
  return node_->ensure_grad();
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (node_) node_->grad.assign(node_->data.size(), T{0});
}

template <typename T>
void Tensor<T>::backward() const {
  if (!node_) throw UsageError("backward() on an undefined tensor");
  if (node_->data.size() != 1)
    throw UsageError("backward() requires a scalar loss, shape is " + to_string(node_->shape));
  Tape<T>::record(*this).backward();
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(shape(), node_->data, false);
}

template <typename T>
Tape<T> Tape<T>::record(const Tensor<T>& root) {
  using NodePtr = std::shared_ptr<detail::Node<T>>;
  Tape tape;
  if (!root.defined()) return tape;
  std::unordered_set<const detail::Node<T>*> seen;
  // Iterative post-order DFS; a node is emitted after all of its parents.
  std::vector<std::pair<NodePtr, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      NodePtr parent = node->parents[next++];
      if (seen.insert(parent.get()).second) stack.emplace_back(std::move(parent), 0);
    } else {
      tape.order_.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

template <typename T>
void Tape<T>::backward() const {
  if (order_.empty()) return;
  // Interior grads are recomputed from scratch; only leaves accumulate.
  for (const auto& node : order_)
    if (!node->is_leaf()) node->grad.assign(node->data.size(), T{0});
  auto& root = order_.back();
  root->ensure_grad()[0] += T{1};
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    auto& node = **it;
    if (node.backward && node.grad.size() == node.data.size()) node.backward(node);
  }
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace tst
