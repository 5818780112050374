#include "vega/anchors.hpp"

#include <stdexcept>

namespace vega {

std::vector<std::vector<float>> build_centers(
    const std::vector<std::string>& classes,
    const std::vector<std::vector<std::vector<float>>>& instances) {
  std::vector<std::vector<float>> centers;
  centers.reserve(instances.size());
  for (std::size_t c = 0; c < instances.size(); ++c) {
    const auto& vs = instances[c];
    const std::string name = c < classes.size() ? classes[c] : std::to_string(c);
    if (vs.empty()) {
      throw DataError(DataErrorKind::EmptyClass, "anchor class '" + name + "' has no instances");
    }
    const std::size_t dim = vs.front().size();
    std::vector<double> acc(dim, 0.0);
    for (const auto& v : vs) {
      if (v.size() != dim) {
        throw DataError(DataErrorKind::DimMismatch, "anchor class '" + name + "' mixes dimensions");
      }
      for (std::size_t d = 0; d < dim; ++d) acc[d] += v[d];
    }
    std::vector<float> center(dim);
    const double inv = 1.0 / static_cast<double>(vs.size());
    for (std::size_t d = 0; d < dim; ++d) center[d] = static_cast<float>(acc[d] * inv);
    centers.push_back(std::move(center));
  }
  return centers;
}

AnchorSet::AnchorSet(std::vector<std::string> classes,
                     std::vector<std::vector<std::vector<float>>> instances)
    : classes_(std::move(classes)), instances_(std::move(instances)) {
  if (classes_.size() != instances_.size()) {
    throw DataError(DataErrorKind::Schema, "anchor set: " + std::to_string(classes_.size()) +
                                               " class names for " +
                                               std::to_string(instances_.size()) + " instance lists");
  }
  if (classes_.empty()) throw DataError(DataErrorKind::Schema, "anchor set has no classes");
  centers_ = build_centers(classes_, instances_);
  dim_ = centers_.front().size();
  for (std::size_t c = 0; c < centers_.size(); ++c) {
    if (centers_[c].size() != dim_) {
      throw DataError(DataErrorKind::DimMismatch,
                      "anchor class '" + classes_[c] + "' has dimension " +
                          std::to_string(centers_[c].size()) + ", expected " + std::to_string(dim_));
    }
  }
}

AnchorSet AnchorSet::from_file(const AnchorFile& file) {
  std::vector<std::string> names;
  std::vector<std::vector<std::vector<float>>> inst;
  for (const auto& c : file.classes) {
    names.push_back(c.name);
    inst.push_back(c.vectors);
  }
  return AnchorSet(std::move(names), std::move(inst));
}

AnchorSet AnchorSet::truncated(std::size_t per_class) const {
  if (per_class == 0) return *this;
  auto inst = instances_;
  for (auto& v : inst) {
    if (v.size() > per_class) v.resize(per_class);
  }
  return AnchorSet(classes_, std::move(inst));
}

template <typename T>
Tensor<T> AnchorSet::center_matrix() const {
  std::vector<T> values;
  values.reserve(num_classes() * dim_);
  for (const auto& c : centers_) values.insert(values.end(), c.begin(), c.end());
  return Tensor<T>({num_classes(), dim_}, std::move(values));
}

void SamplingPolicy::validate() const {
  if (!(q >= 0.0 && q <= 1.0)) {
    throw std::invalid_argument("anchor sampling q must lie in [0, 1], got " + std::to_string(q));
  }
}

AnchorDraw draw_anchor(std::size_t num_instances, const SamplingPolicy& policy, Rng& rng) {
  AnchorDraw d;
  d.is_center = !(uniform01(rng) < policy.q);
  if (!d.is_center) d.instance = uniform_index(rng, num_instances);
  return d;
}

std::span<const float> sample_anchor(const AnchorSet& anchors, std::size_t c,
                                     const SamplingPolicy& policy, Rng& rng) {
  const auto& inst = anchors.instances(c);
  const auto d = draw_anchor(inst.size(), policy, rng);
  if (d.is_center) return anchors.center(c);
  return inst[d.instance];
}

template <typename T>
Tensor<T> sample_anchor_matrix(const AnchorSet& anchors, const SamplingPolicy& policy, Rng& rng) {
  std::vector<T> values;
  values.reserve(anchors.num_classes() * anchors.dim());
  for (std::size_t c = 0; c < anchors.num_classes(); ++c) {
    auto a = sample_anchor(anchors, c, policy, rng);
    values.insert(values.end(), a.begin(), a.end());
  }
  return Tensor<T>({anchors.num_classes(), anchors.dim()}, std::move(values));
}

template <typename T>
Tensor<T> anchor_scores(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& anchors) {
  if (anchors.rank() != 2) {
    throw DimensionError("anchor_scores: anchors must be [C x dim], got " + to_string(anchors.shape()));
  }
  if (x.rank() == 1) {
    auto s = cosine_sim_matrix(tape, reshape(tape, x, {1, x.numel()}), anchors);
    return reshape(tape, s, {anchors.dim(0)});
  }
  return cosine_sim_matrix(tape, x, anchors);
}

template <typename T>
Tensor<T> anchor_distribution(Tape<T>& tape, const Tensor<T>& scores) {
  return softmax(tape, scores, scores.rank() - 1);
}

template Tensor<float> AnchorSet::center_matrix<float>() const;
template Tensor<double> AnchorSet::center_matrix<double>() const;
template Tensor<float> sample_anchor_matrix<float>(const AnchorSet&, const SamplingPolicy&, Rng&);
template Tensor<double> sample_anchor_matrix<double>(const AnchorSet&, const SamplingPolicy&, Rng&);
template Tensor<float> anchor_scores<float>(Tape<float>&, const Tensor<float>&, const Tensor<float>&);
template Tensor<double> anchor_scores<double>(Tape<double>&, const Tensor<double>&, const Tensor<double>&);
template Tensor<float> anchor_distribution<float>(Tape<float>&, const Tensor<float>&);
template Tensor<double> anchor_distribution<double>(Tape<double>&, const Tensor<double>&);

}  // namespace vega
