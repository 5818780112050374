#include "vega/tape.hpp"

#include <algorithm>

namespace vega {

template <typename T>
bool Tape<T>::needs_record(std::initializer_list<const Tensor<T>*> inputs) const {
  if (!recording_) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor<T>* t) { return t->requires_grad(); });
}

template <typename T>
bool Tape<T>::needs_record(const std::vector<Tensor<T>>& inputs) const {
  if (!recording_) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor<T>& t) { return t.requires_grad(); });
}

template <typename T>
void Tape<T>::record(std::vector<NodePtr> inputs, NodePtr output, std::function<void()> backward_fn) {
  if (consumed_) throw ContractError("cannot record onto a tape after backward(); call reset()");
  output->requires_grad = true;
  entries_.push_back(Entry{std::move(inputs), std::move(output), std::move(backward_fn)});
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (consumed_) throw ContractError("backward() called twice on the same tape without reset()");
  if (loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + to_string(loss.shape()));
  }
  if (entries_.empty()) throw ContractError("backward() on an empty tape");
  if (!loss.requires_grad()) throw ContractError("loss does not depend on any trainable tensor");

  consumed_ = true;
  auto& seed = loss.node()->grad;
  seed.assign(1, T(1));
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // not reachable from the loss
    for (auto& in : it->inputs) {
      if (in->requires_grad && in->grad.empty()) in->grad.assign(in->values.size(), T(0));
    }
    it->backward();
  }
}

template <typename T>
void Tape<T>::reset() {
  entries_.clear();
  warnings_.clear();
  consumed_ = false;
}

template <typename T>
void Tape<T>::warn(std::string message) {
  warnings_.push_back(std::move(message));
}

template class Tape<float>;
template class Tape<double>;

}  // namespace vega
