#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vega/tensor.hpp"

namespace vega {

/// Learnable parameters keyed by dotted path ("encoder.T.tcb.weight").
/// Insertion order is preserved and defines checkpoint layout.
template <typename T>
class ParamStore {
 public:
  using Entry = std::pair<std::string, Tensor<T>>;

  Tensor<T>& add(std::string path, Tensor<T> tensor);
  const Tensor<T>& get(const std::string& path) const;
  Tensor<T>& get(const std::string& path);
  bool contains(const std::string& path) const { return index_.count(path) != 0; }

  std::size_t size() const { return entries_.size(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  /// Total scalar count of parameters whose path starts with `prefix`.
  std::size_t count(const std::string& prefix = "") const;

  /// Allocates (if needed) and zeroes every gradient buffer.
  void zero_grad();

  /// Deep copy with independent storage.
  ParamStore clone() const;

  /// Copies values from `other`, which must hold the same paths and shapes.
  void assign_values(const ParamStore& other);

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& [path, t] : entries_) out.add(path, tensor_cast<U>(t));
    return out;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Exact equality of paths, shapes and values.
template <typename T>
bool identical(const ParamStore<T>& a, const ParamStore<T>& b);

extern template class ParamStore<float>;
extern template class ParamStore<double>;

}  // namespace vega
