#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vega {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Raised when operand shapes are incompatible.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for invalid scalar arguments (axis, probability, index ranges).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a call violates a usage contract (e.g. backward twice).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> values;
  std::vector<T> grad;  // empty means "no gradient yet"
  bool requires_grad = false;
};

/// Dense row-major tensor handle. Copies share storage; use clone() for a
/// deep copy.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->values.size(); }

  std::span<const T> values() const { return node_->values; }
  std::span<T> values() { return node_->values; }
  T item() const;
  T at(std::size_t i) const { return node_->values.at(i); }
  T at(std::size_t row, std::size_t col) const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool value) { node_->requires_grad = value; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  /// Allocates a zero gradient buffer if absent.
  std::span<T> mutable_grad();
  void zero_grad();
  void clear_grad() { node_->grad.clear(); }

  Tensor clone() const;
  const std::shared_ptr<TensorNode<T>>& node() const { return node_; }

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& src) {
  std::vector<To> values(src.values().begin(), src.values().end());
  return Tensor<To>(src.shape(), std::move(values), src.requires_grad());
}

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace vega
