#include "vega/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace vega {

void AdamWConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("optimizer lr must be > 0");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("optimizer weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("optimizer betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw std::invalid_argument("optimizer eps must be > 0");
}

template <typename T>
void AdamW<T>::step(ParamStore<T>& params) {
  if (m_.empty()) {
    for (const auto& [path, p] : params) {
      m_.emplace_back(p.numel(), T(0));
      v_.emplace_back(p.numel(), T(0));
    }
  }
  if (m_.size() != params.size()) {
    throw ContractError("optimizer state tracks " + std::to_string(m_.size()) +
                        " parameters, store has " + std::to_string(params.size()));
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double decay = config_.lr * config_.weight_decay;

  std::size_t i = 0;
  for (auto& [path, p] : params) {
    if (!p.has_grad()) throw ContractError("parameter '" + path + "' has no gradient");
    auto w = p.values();
    auto g = p.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      double wk = static_cast<double>(w[k]);
      const double gk = static_cast<double>(g[k]);
      wk -= decay * wk;
      const double mk = b1 * static_cast<double>(m[k]) + (1.0 - b1) * gk;
      const double vk = b2 * static_cast<double>(v[k]) + (1.0 - b2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double mhat = mk / bc1;
      const double vhat = vk / bc2;
      wk -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
      w[k] = static_cast<T>(wk);
    }
    ++i;
  }
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace vega
