#include "vega/model.hpp"

#include <cmath>

#include "vega/anchors.hpp"

namespace vega {

template <typename T>
ParamStore<T> init_model_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ParamStore<T> params;
  auto init = make_rng(seed, Stream::Init);
  init_encoder_params(params, config, init);
  init_supervision_params(params, config, init);
  if (config.vega_head) {
    auto vega_init = make_rng(seed, Stream::VegaInit);
    init_vega_params(params, config, vega_init);
  }
  return params;
}

namespace {

template <typename T>
Tensor<T> stack_rows(Tape<T>& tape, const std::vector<Tensor<T>>& parts) {
  return parts.size() == 1 ? parts.front() : concat(tape, parts, 0);
}

}  // namespace

template <typename T>
ModelOutputs<T> forward(Tape<T>& tape, const ParamStore<T>& params, const ModelConfig& config,
                        const std::vector<ConversationInput<T>>& batch, const ForwardOptions& options,
                        const Tensor<T>& anchors) {
  if (batch.empty()) throw ArgumentError("forward: empty batch");
  const auto modalities = config.active_modalities();
  const DropoutContext drop{options.dropout_rng, config.dropout, options.train};
  const DropoutContext proj_drop{options.vega_dropout_rng, config.projection_dropout, options.train};

  ModelOutputs<T> out;
  std::array<std::vector<Tensor<T>>, kNumModalities> pieces;
  for (const auto& conv : batch) {
    auto z = encode_conversation(tape, params, config, conv, drop);
    for (auto m : modalities) pieces[index_of(m)].push_back(z[index_of(m)]);
    out.labels.insert(out.labels.end(), conv.labels.begin(), conv.labels.end());
  }
  std::vector<Tensor<T>> streams;
  std::vector<LinearRef<T>> gates;
  for (auto m : modalities) {
    out.features[index_of(m)] = stack_rows(tape, pieces[index_of(m)]);
    streams.push_back(out.features[index_of(m)]);
    gates.push_back(linear_ref(params, gate_path(config, m)));
  }
  out.fused = gated_fusion(tape, streams, gates);

  const bool single = config.branch == BranchMode::Single;
  const bool run_projection = single || anchors.defined() || options.projections;
  if (run_projection) {
    if (!config.vega_head) throw ArgumentError("projection requested but the model has no VEGA head");
    for (auto m : modalities) {
      out.projected[index_of(m)] = project(tape, out.features[index_of(m)],
                                           projection_ref(params, uni_projection_path(config, m)), proj_drop);
    }
    out.projected_fused = project(tape, out.fused, projection_ref(params, fusion_projection_path()), proj_drop);
  }

  for (auto m : modalities) {
    const auto& x = single ? out.projected[index_of(m)] : out.features[index_of(m)];
    out.probs[index_of(m)] = classify(tape, x, linear_ref(params, classifier_path(m)), drop);
  }
  out.fused_probs = classify(tape, single ? out.projected_fused : out.fused,
                             linear_ref(params, fusion_classifier_path()), drop);

  if (anchors.defined()) {
    for (auto m : modalities) {
      out.anchor_probs[index_of(m)] = vega_predict(tape, out.projected[index_of(m)], anchors);
    }
    out.fused_anchor_probs = vega_predict(tape, out.projected_fused, anchors);
  }
  return out;
}

template <typename T>
std::vector<std::size_t> predict(const ParamStore<T>& params, const ModelConfig& config,
                                 const Dataset& dataset) {
  std::vector<std::size_t> labels;
  labels.reserve(dataset.num_utterances());
  for (const auto& conv : dataset.conversations) {
    Tape<T> tape(false);
    auto out = forward(tape, params, config, {gather_conversation<T>(dataset, conv)}, ForwardOptions{});
    auto hard = hard_labels(out.fused_probs);
    labels.insert(labels.end(), hard.begin(), hard.end());
  }
  return labels;
}

template <typename T>
double anchor_alignment(const ParamStore<T>& params, const ModelConfig& config,
                        const Dataset& dataset, const Tensor<T>& centers) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& conv : dataset.conversations) {
    Tape<T> tape(false);
    ForwardOptions options;
    options.projections = true;
    auto input = gather_conversation<T>(dataset, conv);
    auto out = forward(tape, params, config, {input}, options);
    auto scores = anchor_scores(tape, out.projected_fused, centers);
    for (std::size_t r = 0; r < input.length(); ++r) {
      total += static_cast<double>(scores.at(r, input.labels[r]));
      ++count;
    }
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

template <typename T>
ParamCounts param_count(const ParamStore<T>& params) {
  ParamCounts c;
  c.encoder = params.count("encoder.");
  c.supervision = params.count("supervision.");
  c.vega = params.count("vega.");
  c.total = params.count();
  return c;
}

#define VEGA_INSTANTIATE_MODEL(T)                                                                   \
  template ParamStore<T> init_model_params<T>(const ModelConfig&, std::uint64_t);                   \
  template ModelOutputs<T> forward<T>(Tape<T>&, const ParamStore<T>&, const ModelConfig&,           \
                                      const std::vector<ConversationInput<T>>&,                     \
                                      const ForwardOptions&, const Tensor<T>&);                     \
  template std::vector<std::size_t> predict<T>(const ParamStore<T>&, const ModelConfig&,            \
                                               const Dataset&);                                     \
  template double anchor_alignment<T>(const ParamStore<T>&, const ModelConfig&, const Dataset&,     \
                                      const Tensor<T>&);                                            \
  template ParamCounts param_count<T>(const ParamStore<T>&);

VEGA_INSTANTIATE_MODEL(float)
VEGA_INSTANTIATE_MODEL(double)

}  // namespace vega
