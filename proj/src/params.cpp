#include "vega/params.hpp"

#include <algorithm>

namespace vega {

template <typename T>
Tensor<T>& ParamStore<T>::add(std::string path, Tensor<T> tensor) {
  if (contains(path)) throw ArgumentError("duplicate parameter path '" + path + "'");
  index_.emplace(path, entries_.size());
  tensor.set_requires_grad(true);
  entries_.emplace_back(std::move(path), std::move(tensor));
  return entries_.back().second;
}

template <typename T>
const Tensor<T>& ParamStore<T>::get(const std::string& path) const {
  auto it = index_.find(path);
  if (it == index_.end()) throw ArgumentError("unknown parameter '" + path + "'");
  return entries_[it->second].second;
}

template <typename T>
Tensor<T>& ParamStore<T>::get(const std::string& path) {
  auto it = index_.find(path);
  if (it == index_.end()) throw ArgumentError("unknown parameter '" + path + "'");
  return entries_[it->second].second;
}

template <typename T>
std::size_t ParamStore<T>::count(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& [path, t] : entries_) {
    if (path.compare(0, prefix.size(), prefix) == 0) n += t.numel();
  }
  return n;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& [path, t] : entries_) {
    t.mutable_grad();
    t.zero_grad();
  }
}

template <typename T>
ParamStore<T> ParamStore<T>::clone() const {
  ParamStore out;
  for (const auto& [path, t] : entries_) out.add(path, t.clone());
  return out;
}

template <typename T>
void ParamStore<T>::assign_values(const ParamStore& other) {
  if (other.size() != size()) {
    throw ArgumentError("parameter sets differ in size: " + std::to_string(size()) + " vs " +
                        std::to_string(other.size()));
  }
  for (auto& [path, t] : entries_) {
    const auto& src = other.get(path);
    if (src.shape() != t.shape()) {
      throw DimensionError("parameter '" + path + "' has shape " + to_string(t.shape()) +
                           ", source has " + to_string(src.shape()));
    }
    std::copy(src.values().begin(), src.values().end(), t.values().begin());
  }
}

template <typename T>
bool identical(const ParamStore<T>& a, const ParamStore<T>& b) {
  if (a.size() != b.size()) return false;
  auto ia = a.begin();
  auto ib = b.begin();
  for (; ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first || ia->second.shape() != ib->second.shape()) return false;
    if (!std::equal(ia->second.values().begin(), ia->second.values().end(),
                    ib->second.values().begin())) {
      return false;
    }
  }
  return true;
}

template class ParamStore<float>;
template class ParamStore<double>;
template bool identical<float>(const ParamStore<float>&, const ParamStore<float>&);
template bool identical<double>(const ParamStore<double>&, const ParamStore<double>&);

}  // namespace vega
