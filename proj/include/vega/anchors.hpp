#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vega/data.hpp"
#include "vega/ops.hpp"
#include "vega/rng.hpp"

namespace vega {

/// Per-class visual anchor embeddings and their class centers.
/// Immutable after construction.
class AnchorSet {
 public:
  AnchorSet(std::vector<std::string> classes,
            std::vector<std::vector<std::vector<float>>> instances);

  static AnchorSet from_file(const AnchorFile& file);
  /// Keeps the first `per_class` instances of every class (0 keeps all).
  AnchorSet truncated(std::size_t per_class) const;

  std::size_t num_classes() const { return classes_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<std::string>& classes() const { return classes_; }
  const std::vector<std::vector<float>>& instances(std::size_t c) const { return instances_.at(c); }
  std::span<const float> center(std::size_t c) const { return centers_.at(c); }

  /// Centers as a [C x dim] matrix.
  template <typename T>
  Tensor<T> center_matrix() const;

 private:
  std::vector<std::string> classes_;
  std::size_t dim_ = 0;
  std::vector<std::vector<std::vector<float>>> instances_;
  std::vector<std::vector<float>> centers_;
};

/// Componentwise mean of each class's instances. Throws DataError naming any
/// empty class.
std::vector<std::vector<float>> build_centers(const std::vector<std::string>& classes,
                                              const std::vector<std::vector<std::vector<float>>>& instances);

/// `q` is the probability of drawing a RANDOM instance anchor; 1 - q is the
/// probability of the class center. q = 0 always uses centers, q = 1 always
/// uses instances.
struct SamplingPolicy {
  double q = 0.2;

  void validate() const;
};

struct AnchorDraw {
  bool is_center = true;
  std::size_t instance = 0;  // valid when !is_center
};

/// One Bernoulli draw, plus one uniform index draw when the instance branch
/// is taken.
AnchorDraw draw_anchor(std::size_t num_instances, const SamplingPolicy& policy, Rng& rng);

std::span<const float> sample_anchor(const AnchorSet& anchors, std::size_t c,
                                     const SamplingPolicy& policy, Rng& rng);

/// One sampled anchor per class, stacked into a [C x dim] constant tensor.
template <typename T>
Tensor<T> sample_anchor_matrix(const AnchorSet& anchors, const SamplingPolicy& policy, Rng& rng);

/// s_c = cos(x, a_c). x is a vector [dim] or a batch [N x dim]; anchors is
/// [C x dim]. Returns [C] or [N x C].
template <typename T>
Tensor<T> anchor_scores(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& anchors);

/// Softmax over the class axis of anchor scores.
template <typename T>
Tensor<T> anchor_distribution(Tape<T>& tape, const Tensor<T>& scores);

}  // namespace vega
