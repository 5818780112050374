#include "vega/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace vega {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad)
    : node_(std::make_shared<TensorNode<T>>()) {
  if (vega::numel(shape) != values.size()) {
    throw DimensionError("tensor shape " + to_string(shape) + " holds " +
                         std::to_string(vega::numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  node_->shape = std::move(shape);
  node_->values = std::move(values);
  node_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  const auto n = vega::numel(shape);
  return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<T>{value}, requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw DimensionError("item() on tensor of shape " + to_string(shape()));
  }
  return node_->values[0];
}

template <typename T>
T Tensor<T>::at(std::size_t row, std::size_t col) const {
  if (rank() != 2 || row >= dim(0) || col >= dim(1)) {
    throw ArgumentError("index (" + std::to_string(row) + "," + std::to_string(col) +
                        ") out of range for " + to_string(shape()));
  }
  return node_->values[row * dim(1) + col];
}

template <typename T>
std::span<T> Tensor<T>::mutable_grad() {
  if (node_->grad.empty()) node_->grad.assign(node_->values.size(), T(0));
  return node_->grad;
}

template <typename T>
void Tensor<T>::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  Tensor out(node_->shape, node_->values, node_->requires_grad);
  out.node_->grad = node_->grad;
  return out;
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace vega
