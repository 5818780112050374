#pragma once

#include <cstddef>
#include <vector>

#include "vega/params.hpp"

namespace vega {

struct AdamWConfig {
  double lr = 3e-4;
  double weight_decay = 0.7;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

/// Adam with decoupled weight decay. Decay is applied first,
/// w <- w - lr*wd*w, then the bias-corrected Adam step. Every parameter must
/// carry a gradient buffer (zero is fine).
template <typename T>
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) : config_(config) { config_.validate(); }

  void step(ParamStore<T>& params);
  std::size_t steps() const { return step_; }
  const AdamWConfig& config() const { return config_; }

 private:
  AdamWConfig config_;
  std::size_t step_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

extern template class AdamW<float>;
extern template class AdamW<double>;

}  // namespace vega
