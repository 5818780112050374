#pragma once

#include <cmath>
#include <string>

#include "vega/params.hpp"
#include "vega/rng.hpp"

namespace vega {

// Linear maps: U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases start at zero.
template <typename T>
void add_linear(ParamStore<T>& params, const std::string& prefix, std::size_t in, std::size_t out,
                Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  std::vector<T> w(in * out);
  for (auto& v : w) v = static_cast<T>(u(rng));
  params.add(prefix + ".weight", Tensor<T>({in, out}, std::move(w)));
  params.add(prefix + ".bias", Tensor<T>::zeros({out}));
}

template <typename T>
void add_matrix(ParamStore<T>& params, const std::string& path, std::size_t in, std::size_t out,
                Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  std::vector<T> w(in * out);
  for (auto& v : w) v = static_cast<T>(u(rng));
  params.add(path, Tensor<T>({in, out}, std::move(w)));
}

// Embedding tables: N(0, 0.02).
template <typename T>
void add_embedding(ParamStore<T>& params, const std::string& path, std::size_t rows,
                   std::size_t dim, Rng& rng) {
  std::normal_distribution<double> n(0.0, 0.02);
  std::vector<T> w(rows * dim);
  for (auto& v : w) v = static_cast<T>(n(rng));
  params.add(path, Tensor<T>({rows, dim}, std::move(w)));
}

template <typename T>
void add_layer_norm(ParamStore<T>& params, const std::string& prefix, std::size_t dim) {
  params.add(prefix + ".gain", Tensor<T>::full({dim}, T(1)));
  params.add(prefix + ".bias", Tensor<T>::zeros({dim}));
}

}  // namespace vega
