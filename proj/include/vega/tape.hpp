#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "vega/tensor.hpp"

namespace vega {

/// Ordered record of executed differentiable operations.
///
/// Operations append entries as they run, so the record is always in
/// topological order. backward() walks it once in reverse; a second call
/// without reset() is a contract error. A tape belongs to one thread at a
/// time; independent tapes may run concurrently.
template <typename T>
class Tape {
 public:
  using NodePtr = std::shared_ptr<TensorNode<T>>;

  /// A non-recording tape evaluates operations without keeping any history.
  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  std::size_t size() const { return entries_.size(); }

  /// True when the op producing an output from these inputs must be recorded.
  bool needs_record(std::initializer_list<const Tensor<T>*> inputs) const;
  bool needs_record(const std::vector<Tensor<T>>& inputs) const;

  void record(std::vector<NodePtr> inputs, NodePtr output, std::function<void()> backward_fn);

  void backward(const Tensor<T>& loss);
  void reset();

  /// Numerical warnings (e.g. zero-norm cosine inputs) raised while recording.
  void warn(std::string message);
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  struct Entry {
    std::vector<NodePtr> inputs;
    NodePtr output;
    std::function<void()> backward;
  };

  bool recording_;
  bool consumed_ = false;
  std::vector<Entry> entries_;
  std::vector<std::string> warnings_;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace vega
