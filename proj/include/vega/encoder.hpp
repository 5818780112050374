#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "vega/model_config.hpp"
#include "vega/ops.hpp"
#include "vega/params.hpp"

namespace vega {

template <typename T>
struct LinearRef {
  Tensor<T> weight;  // [in x out]
  Tensor<T> bias;    // [out]
};

template <typename T>
LinearRef<T> linear_ref(const ParamStore<T>& params, const std::string& prefix) {
  return {params.get(prefix + ".weight"), params.get(prefix + ".bias")};
}

template <typename T>
struct TransformerLayerRef {
  LinearRef<T> query, key, value, output;
  Tensor<T> norm1_gain, norm1_bias;
  LinearRef<T> ff_in, ff_out;
  Tensor<T> norm2_gain, norm2_bias;
};

template <typename T>
TransformerLayerRef<T> transformer_layer_ref(const ParamStore<T>& params, const std::string& prefix);

/// Dropout state for one forward pass.
struct DropoutContext {
  Rng* rng = nullptr;
  double p = 0.0;
  bool train = false;
};

/// Constant input of one conversation.
template <typename T>
struct ConversationInput {
  std::array<Tensor<T>, kNumModalities> features;  // [N x d_m], inactive ones undefined
  std::vector<std::size_t> speakers;
  std::vector<std::size_t> labels;
  std::size_t length() const { return speakers.size(); }
};

template <typename T>
ConversationInput<T> gather_conversation(const Dataset& dataset, const Conversation& conv);

/// Temporal convolution over the utterance axis, zero padded at conversation
/// edges: [N x d_m] -> [N x d].
template <typename T>
Tensor<T> temporal_conv_block(Tape<T>& tape, const Tensor<T>& h, std::size_t half_window,
                              const LinearRef<T>& conv);

/// Fixed sinusoidal table, [positions x dim] row-major.
std::vector<double> sinusoid_table(std::size_t positions, std::size_t dim);

/// h_t + p_t + s_t. Either term is skipped when its table is undefined.
template <typename T>
Tensor<T> add_position_speaker(Tape<T>& tape, const Tensor<T>& h,
                               const std::vector<std::size_t>& speakers,
                               const Tensor<T>& position_table, const Tensor<T>& speaker_table);

/// Multi-head attention with queries from `query` and keys/values from
/// `context`, including the output projection.
template <typename T>
Tensor<T> attention(Tape<T>& tape, const Tensor<T>& query, const Tensor<T>& context,
                    const TransformerLayerRef<T>& layer, std::size_t heads);

/// Post-norm transformer block(s): attention + residual + norm, then
/// feed-forward (SiLU) + residual + norm. No causal mask.
template <typename T>
Tensor<T> contextual_transformer(Tape<T>& tape, const Tensor<T>& query, const Tensor<T>& context,
                                 const std::vector<TransformerLayerRef<T>>& layers,
                                 std::size_t heads, const DropoutContext& drop);

/// z_t = sigmoid(z~_t W) * z~_t.
template <typename T>
Tensor<T> gate_stream(Tape<T>& tape, const Tensor<T>& stream, const Tensor<T>& gate_weight);

/// Linear map of the concatenated streams back to the hidden width.
template <typename T>
Tensor<T> unify_modality(Tape<T>& tape, const std::vector<Tensor<T>>& streams,
                         const LinearRef<T>& unify);

/// Names of the context streams built for modality m, in concatenation
/// order: "intra", then "inter_<source>" for every other active modality.
std::vector<std::string> stream_names(const ModelConfig& config, Modality m);

/// Full per-modality context encoding of one conversation; returns z^(m)
/// ([N x hidden]) for active modalities.
template <typename T>
std::array<Tensor<T>, kNumModalities> encode_conversation(Tape<T>& tape,
                                                          const ParamStore<T>& params,
                                                          const ModelConfig& config,
                                                          const ConversationInput<T>& input,
                                                          const DropoutContext& drop);

/// Adds all encoder parameters ("encoder.*") with their initial values.
template <typename T>
void init_encoder_params(ParamStore<T>& params, const ModelConfig& config, Rng& rng);

}  // namespace vega
