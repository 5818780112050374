#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "vega/encoder.hpp"

namespace vega {

/// softmax(x W + b) over classes, with optional input dropout.
template <typename T>
Tensor<T> classify(Tape<T>& tape, const Tensor<T>& x, const LinearRef<T>& classifier,
                   const DropoutContext& drop = {});

/// Row-wise argmax of [N x C]; ties go to the lowest class index.
template <typename T>
std::vector<std::size_t> hard_labels(const Tensor<T>& probs);

/// Per-utterance modality weights [N x M] from scalar gate scores. One scorer
/// per entry of `gates` (a shared scorer is simply repeated).
template <typename T>
Tensor<T> fusion_weights(Tape<T>& tape, const std::vector<Tensor<T>>& streams,
                         const std::vector<LinearRef<T>>& gates);

/// f_t = sum_m w_t^(m) z_t^(m).
template <typename T>
Tensor<T> gated_fusion(Tape<T>& tape, const std::vector<Tensor<T>>& streams,
                       const std::vector<LinearRef<T>>& gates);

template <typename T>
struct ProjectionRef {
  LinearRef<T> in, out;
};

template <typename T>
ProjectionRef<T> projection_ref(const ParamStore<T>& params, const std::string& prefix) {
  return {linear_ref(params, prefix + ".in"), linear_ref(params, prefix + ".out")};
}

/// Two-layer projection into anchor space: out(SiLU(dropout(in(x)))).
template <typename T>
Tensor<T> project(Tape<T>& tape, const Tensor<T>& x, const ProjectionRef<T>& proj,
                  const DropoutContext& drop = {});

/// Anchor-based class distribution: softmax of cosine scores against one
/// anchor per class ([C x d_anc]).
template <typename T>
Tensor<T> vega_predict(Tape<T>& tape, const Tensor<T>& projected, const Tensor<T>& anchors);

/// Parameter paths of the heads.
std::string classifier_path(Modality m);
std::string gate_path(const ModelConfig& config, Modality m);
std::string uni_projection_path(const ModelConfig& config, Modality m);
inline const char* fusion_classifier_path() { return "supervision.fusion"; }
inline const char* fusion_projection_path() { return "vega.fuse"; }

/// "supervision.*": per-modality classifiers, gate scorer(s), fusion classifier.
template <typename T>
void init_supervision_params(ParamStore<T>& params, const ModelConfig& config, Rng& rng);

/// "vega.*": unimodal projection(s) and the fusion projection.
template <typename T>
void init_vega_params(ParamStore<T>& params, const ModelConfig& config, Rng& rng);

}  // namespace vega
