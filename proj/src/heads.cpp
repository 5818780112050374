#include "vega/heads.hpp"

#include "vega/anchors.hpp"
#include "vega/init.hpp"

namespace vega {

template <typename T>
Tensor<T> classify(Tape<T>& tape, const Tensor<T>& x, const LinearRef<T>& classifier,
                   const DropoutContext& drop) {
  Tensor<T> in = x;
  if (drop.rng) in = dropout(tape, in, drop.p, *drop.rng, drop.train);
  return softmax(tape, linear(tape, in, classifier.weight, classifier.bias), 1);
}

template <typename T>
std::vector<std::size_t> hard_labels(const Tensor<T>& probs) {
  if (probs.rank() != 2) throw DimensionError("hard_labels expects [N x C], got " + to_string(probs.shape()));
  const std::size_t n = probs.dim(0), c = probs.dim(1);
  std::vector<std::size_t> out(n, 0);
  auto v = probs.values();
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j) {
      if (v[r * c + j] > v[r * c + best]) best = j;
    }
    out[r] = best;
  }
  return out;
}

template <typename T>
Tensor<T> fusion_weights(Tape<T>& tape, const std::vector<Tensor<T>>& streams,
                         const std::vector<LinearRef<T>>& gates) {
  if (streams.empty() || streams.size() != gates.size()) {
    throw ArgumentError("fusion needs one gate per stream (" + std::to_string(streams.size()) +
                        " streams, " + std::to_string(gates.size()) + " gates)");
  }
  std::vector<Tensor<T>> scores;
  for (std::size_t i = 0; i < streams.size(); ++i) {
    if (streams[i].shape() != streams.front().shape()) {
      throw DimensionError("fusion streams differ in shape: " + to_string(streams.front().shape()) +
                           " vs " + to_string(streams[i].shape()));
    }
    scores.push_back(linear(tape, streams[i], gates[i].weight, gates[i].bias));
  }
  auto cat = scores.size() == 1 ? scores.front() : concat(tape, scores, 1);
  return softmax(tape, cat, 1);
}

template <typename T>
Tensor<T> gated_fusion(Tape<T>& tape, const std::vector<Tensor<T>>& streams,
                       const std::vector<LinearRef<T>>& gates) {
  auto w = fusion_weights(tape, streams, gates);
  const std::size_t n = streams.front().dim(0);
  Tensor<T> f;
  for (std::size_t i = 0; i < streams.size(); ++i) {
    auto wi = reshape(tape, slice(tape, w, 1, i, 1), {n});
    auto term = scale_rows(tape, streams[i], wi);
    f = f.defined() ? add(tape, f, term) : term;
  }
  return f;
}

template <typename T>
Tensor<T> project(Tape<T>& tape, const Tensor<T>& x, const ProjectionRef<T>& proj,
                  const DropoutContext& drop) {
  Tensor<T> hidden = linear(tape, x, proj.in.weight, proj.in.bias);
  if (drop.rng) hidden = dropout(tape, hidden, drop.p, *drop.rng, drop.train);
  return linear(tape, silu(tape, hidden), proj.out.weight, proj.out.bias);
}

template <typename T>
Tensor<T> vega_predict(Tape<T>& tape, const Tensor<T>& projected, const Tensor<T>& anchors) {
  return anchor_distribution(tape, anchor_scores(tape, projected, anchors));
}

std::string classifier_path(Modality m) {
  return std::string("supervision.") + modality_tag(m) + ".classifier";
}

std::string gate_path(const ModelConfig& config, Modality m) {
  return config.shared_gate ? "supervision.gate" : std::string("supervision.gate_") + modality_tag(m);
}

std::string uni_projection_path(const ModelConfig& config, Modality m) {
  return config.shared_projection ? "vega.uni" : std::string("vega.uni_") + modality_tag(m);
}

template <typename T>
void init_supervision_params(ParamStore<T>& params, const ModelConfig& config, Rng& rng) {
  const std::size_t in = config.classifier_input();
  for (auto m : config.active_modalities()) {
    add_linear(params, classifier_path(m), in, config.num_classes, rng);
  }
  for (auto m : config.active_modalities()) {
    const auto path = gate_path(config, m);
    if (!params.contains(path + ".weight")) add_linear(params, path, config.hidden, 1, rng);
  }
  add_linear(params, fusion_classifier_path(), in, config.num_classes, rng);
}

template <typename T>
void init_vega_params(ParamStore<T>& params, const ModelConfig& config, Rng& rng) {
  const std::size_t width = config.projection_width();
  auto add_projection = [&](const std::string& prefix) {
    add_linear(params, prefix + ".in", config.hidden, width, rng);
    add_linear(params, prefix + ".out", width, config.anchor_dim, rng);
  };
  for (auto m : config.active_modalities()) {
    const auto path = uni_projection_path(config, m);
    if (!params.contains(path + ".in.weight")) add_projection(path);
  }
  add_projection(fusion_projection_path());
}

#define VEGA_INSTANTIATE_HEADS(T)                                                                   \
  template Tensor<T> classify<T>(Tape<T>&, const Tensor<T>&, const LinearRef<T>&,                   \
                                 const DropoutContext&);                                            \
  template std::vector<std::size_t> hard_labels<T>(const Tensor<T>&);                               \
  template Tensor<T> fusion_weights<T>(Tape<T>&, const std::vector<Tensor<T>>&,                     \
                                       const std::vector<LinearRef<T>>&);                           \
  template Tensor<T> gated_fusion<T>(Tape<T>&, const std::vector<Tensor<T>>&,                       \
                                     const std::vector<LinearRef<T>>&);                             \
  template Tensor<T> project<T>(Tape<T>&, const Tensor<T>&, const ProjectionRef<T>&,                \
                                const DropoutContext&);                                             \
  template Tensor<T> vega_predict<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                 \
  template void init_supervision_params<T>(ParamStore<T>&, const ModelConfig&, Rng&);               \
  template void init_vega_params<T>(ParamStore<T>&, const ModelConfig&, Rng&);

VEGA_INSTANTIATE_HEADS(float)
VEGA_INSTANTIATE_HEADS(double)

}  // namespace vega
