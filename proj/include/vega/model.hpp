#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "vega/heads.hpp"

namespace vega {

/// Builds every parameter of the network. Encoder and supervision weights
/// come from the Init stream; the VEGA head (when configured) comes from its
/// own stream and is added last, so dropping it leaves the rest untouched.
template <typename T>
ParamStore<T> init_model_params(const ModelConfig& config, std::uint64_t seed);

/// All intermediate predictions of one batch. Utterances of all
/// conversations are stacked row-wise in batch order.
template <typename T>
struct ModelOutputs {
  std::vector<std::size_t> labels;
  std::array<Tensor<T>, kNumModalities> features;  // z^(m)
  Tensor<T> fused;                                 // f
  std::array<Tensor<T>, kNumModalities> probs;     // unimodal class distributions
  Tensor<T> fused_probs;
  // Present only when the projection heads ran.
  std::array<Tensor<T>, kNumModalities> projected;
  Tensor<T> projected_fused;
  // Present only when anchors were supplied.
  std::array<Tensor<T>, kNumModalities> anchor_probs;
  Tensor<T> fused_anchor_probs;
};

struct ForwardOptions {
  bool train = false;
  Rng* dropout_rng = nullptr;       // encoder and classifier dropout
  Rng* vega_dropout_rng = nullptr;  // projection dropout
  bool projections = false;         // run the projection heads even without anchors
};

/// Forward pass over a batch of conversations. `anchors` ([C x d_anc], one
/// sampled anchor per class) enables the anchor predictions; leave it
/// undefined at test time. Conversations are encoded independently.
template <typename T>
ModelOutputs<T> forward(Tape<T>& tape, const ParamStore<T>& params, const ModelConfig& config,
                        const std::vector<ConversationInput<T>>& batch, const ForwardOptions& options,
                        const Tensor<T>& anchors = {});

/// Test-time labels of every utterance in `dataset`, conversation order.
/// Only the supervision branch is consulted.
template <typename T>
std::vector<std::size_t> predict(const ParamStore<T>& params, const ModelConfig& config,
                                 const Dataset& dataset);

/// Mean cosine similarity between the projected fused feature of each
/// utterance and the center anchor of its own class (eval mode).
template <typename T>
double anchor_alignment(const ParamStore<T>& params, const ModelConfig& config,
                        const Dataset& dataset, const Tensor<T>& centers);

struct ParamCounts {
  std::size_t encoder = 0;
  std::size_t supervision = 0;
  std::size_t vega = 0;
  std::size_t total = 0;
};

template <typename T>
ParamCounts param_count(const ParamStore<T>& params);

}  // namespace vega
