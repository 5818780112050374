#include "vega/encoder.hpp"

#include <cmath>

#include "vega/init.hpp"

namespace vega {

namespace {

std::string modality_prefix(Modality m) { return std::string("encoder.") + modality_tag(m); }

template <typename T>
Tensor<T> affine_norm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gain,
                      const Tensor<T>& bias) {
  return add(tape, mul(tape, layer_norm(tape, x, 1), gain), bias);
}

}  // namespace

template <typename T>
TransformerLayerRef<T> transformer_layer_ref(const ParamStore<T>& params, const std::string& prefix) {
  TransformerLayerRef<T> ref;
  ref.query = linear_ref(params, prefix + ".q");
  ref.key = linear_ref(params, prefix + ".k");
  ref.value = linear_ref(params, prefix + ".v");
  ref.output = linear_ref(params, prefix + ".o");
  ref.norm1_gain = params.get(prefix + ".ln1.gain");
  ref.norm1_bias = params.get(prefix + ".ln1.bias");
  ref.ff_in = linear_ref(params, prefix + ".ff1");
  ref.ff_out = linear_ref(params, prefix + ".ff2");
  ref.norm2_gain = params.get(prefix + ".ln2.gain");
  ref.norm2_bias = params.get(prefix + ".ln2.bias");
  return ref;
}

template <typename T>
ConversationInput<T> gather_conversation(const Dataset& dataset, const Conversation& conv) {
  ConversationInput<T> input;
  const std::size_t n = conv.utterances.size();
  for (auto m : kAllModalities) {
    const auto& table = dataset.features[index_of(m)];
    if (!table) continue;
    std::vector<T> values;
    values.reserve(n * table->dim);
    for (const auto& u : conv.utterances) {
      auto row = table->row(u.rows[index_of(m)]);
      values.insert(values.end(), row.begin(), row.end());
    }
    input.features[index_of(m)] = Tensor<T>({n, table->dim}, std::move(values));
  }
  for (const auto& u : conv.utterances) {
    input.speakers.push_back(u.speaker);
    input.labels.push_back(u.label);
  }
  return input;
}

template <typename T>
Tensor<T> temporal_conv_block(Tape<T>& tape, const Tensor<T>& h, std::size_t half_window,
                              const LinearRef<T>& conv) {
  return linear(tape, unfold_time(tape, h, half_window), conv.weight, conv.bias);
}

std::vector<double> sinusoid_table(std::size_t positions, std::size_t dim) {
  std::vector<double> table(positions * dim);
  for (std::size_t p = 0; p < positions; ++p) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(dim));
      const double angle = static_cast<double>(p) * freq;
      table[p * dim + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return table;
}

template <typename T>
Tensor<T> add_position_speaker(Tape<T>& tape, const Tensor<T>& h,
                               const std::vector<std::size_t>& speakers,
                               const Tensor<T>& position_table, const Tensor<T>& speaker_table) {
  const std::size_t n = h.dim(0);
  if (speakers.size() != n) {
    throw DimensionError("speaker ids (" + std::to_string(speakers.size()) +
                         ") do not match sequence length " + std::to_string(n));
  }
  Tensor<T> out = h;
  if (position_table.defined()) {
    if (n > position_table.dim(0)) {
      throw ArgumentError("conversation length " + std::to_string(n) + " exceeds max_positions " +
                          std::to_string(position_table.dim(0)));
    }
    out = add(tape, out, slice(tape, position_table, 0, 0, n));
  }
  if (speaker_table.defined()) {
    out = add(tape, out, embedding_lookup(tape, speaker_table, speakers));
  }
  return out;
}

template <typename T>
Tensor<T> attention(Tape<T>& tape, const Tensor<T>& query, const Tensor<T>& context,
                    const TransformerLayerRef<T>& layer, std::size_t heads) {
  const std::size_t d = query.dim(1);
  const std::size_t dh = d / heads;
  auto q = linear(tape, query, layer.query.weight, layer.query.bias);
  auto k = linear(tape, context, layer.key.weight, layer.key.bias);
  auto v = linear(tape, context, layer.value.weight, layer.value.bias);
  const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  std::vector<Tensor<T>> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    auto qh = heads == 1 ? q : slice(tape, q, 1, h * dh, dh);
    auto kh = heads == 1 ? k : slice(tape, k, 1, h * dh, dh);
    auto vh = heads == 1 ? v : slice(tape, v, 1, h * dh, dh);
    auto scores = scale(tape, matmul(tape, qh, transpose(tape, kh)), inv_sqrt);
    outs.push_back(matmul(tape, softmax(tape, scores, 1), vh));
  }
  auto merged = heads == 1 ? outs.front() : concat(tape, outs, 1);
  return linear(tape, merged, layer.output.weight, layer.output.bias);
}

template <typename T>
Tensor<T> contextual_transformer(Tape<T>& tape, const Tensor<T>& query, const Tensor<T>& context,
                                 const std::vector<TransformerLayerRef<T>>& layers,
                                 std::size_t heads, const DropoutContext& drop) {
  if (query.dim(0) != context.dim(0)) {
    throw DimensionError("query and context lengths differ: " + to_string(query.shape()) + " vs " +
                         to_string(context.shape()));
  }
  Tensor<T> x = query;
  for (const auto& layer : layers) {
    // Self-attention when the caller passes the same stream twice; after the
    // first layer the context stays fixed and only the query evolves.
    const Tensor<T>& ctx = (context.node() == query.node()) ? x : context;
    auto a = attention(tape, x, ctx, layer, heads);
    if (drop.rng) a = dropout(tape, a, drop.p, *drop.rng, drop.train);
    x = affine_norm(tape, add(tape, x, a), layer.norm1_gain, layer.norm1_bias);
    auto f = linear(tape, silu(tape, linear(tape, x, layer.ff_in.weight, layer.ff_in.bias)),
                    layer.ff_out.weight, layer.ff_out.bias);
    if (drop.rng) f = dropout(tape, f, drop.p, *drop.rng, drop.train);
    x = affine_norm(tape, add(tape, x, f), layer.norm2_gain, layer.norm2_bias);
  }
  return x;
}

template <typename T>
Tensor<T> gate_stream(Tape<T>& tape, const Tensor<T>& stream, const Tensor<T>& gate_weight) {
  return mul(tape, sigmoid(tape, matmul(tape, stream, gate_weight)), stream);
}

template <typename T>
Tensor<T> unify_modality(Tape<T>& tape, const std::vector<Tensor<T>>& streams,
                         const LinearRef<T>& unify) {
  auto cat = streams.size() == 1 ? streams.front() : concat(tape, streams, 1);
  return linear(tape, cat, unify.weight, unify.bias);
}

std::vector<std::string> stream_names(const ModelConfig& config, Modality m) {
  std::vector<std::string> names{"intra"};
  for (auto src : config.active_modalities()) {
    if (src != m) names.push_back(std::string("inter_") + modality_tag(src));
  }
  return names;
}

template <typename T>
std::array<Tensor<T>, kNumModalities> encode_conversation(Tape<T>& tape,
                                                          const ParamStore<T>& params,
                                                          const ModelConfig& config,
                                                          const ConversationInput<T>& input,
                                                          const DropoutContext& drop) {
  const std::size_t n = input.length();
  if (n == 0) throw ArgumentError("empty conversation");
  if (n > config.max_positions) {
    throw ArgumentError("conversation length " + std::to_string(n) + " exceeds max_positions " +
                        std::to_string(config.max_positions));
  }
  for (auto s : input.speakers) {
    if (s >= config.num_speakers) {
      throw ArgumentError("speaker id " + std::to_string(s) + " out of range [0, " +
                          std::to_string(config.num_speakers) + ")");
    }
  }

  Tensor<T> positions;
  if (config.use_positional) {
    auto table = sinusoid_table(n, config.hidden);
    positions = Tensor<T>({n, config.hidden}, std::vector<T>(table.begin(), table.end()));
  }
  Tensor<T> speakers;
  if (config.use_speaker) speakers = params.get("encoder.speaker");

  std::array<Tensor<T>, kNumModalities> base;
  for (auto m : config.active_modalities()) {
    const auto& h = input.features[index_of(m)];
    if (!h.defined()) {
      throw ArgumentError(std::string("missing features for active modality ") + modality_tag(m));
    }
    const auto prefix = modality_prefix(m);
    auto conv = temporal_conv_block(tape, h, config.half_window, linear_ref(params, prefix + ".tcb"));
    base[index_of(m)] = add_position_speaker(tape, conv, input.speakers, positions, speakers);
  }

  std::array<Tensor<T>, kNumModalities> out;
  for (auto m : config.active_modalities()) {
    const auto prefix = modality_prefix(m);
    const auto& own = base[index_of(m)];
    std::vector<Tensor<T>> streams;
    for (const auto& name : stream_names(config, m)) {
      const bool intra = name == "intra";
      const bool enabled = intra ? config.use_intra : config.use_inter;
      if (!enabled) {
        streams.push_back(own);
        continue;
      }
      const auto& ctx = intra ? own : base[index_of(modality_from_tag(name.back()))];
      std::vector<TransformerLayerRef<T>> layers;
      for (std::size_t l = 0; l < config.layers; ++l) {
        layers.push_back(transformer_layer_ref(params, prefix + "." + name + ".layer" + std::to_string(l)));
      }
      auto ctx_out = contextual_transformer(tape, own, ctx, layers, config.heads, drop);
      streams.push_back(gate_stream(tape, ctx_out, params.get(prefix + "." + name + ".gate")));
    }
    out[index_of(m)] = unify_modality(tape, streams, linear_ref(params, prefix + ".unify"));
  }
  return out;
}

template <typename T>
void init_encoder_params(ParamStore<T>& params, const ModelConfig& config, Rng& rng) {
  const std::size_t d = config.hidden;
  if (config.use_speaker) add_embedding(params, "encoder.speaker", config.num_speakers, d, rng);
  for (auto m : config.active_modalities()) {
    const auto prefix = modality_prefix(m);
    add_linear(params, prefix + ".tcb", (2 * config.half_window + 1) * config.input_dims[index_of(m)], d, rng);
    const auto names = stream_names(config, m);
    for (const auto& name : names) {
      const bool enabled = name == "intra" ? config.use_intra : config.use_inter;
      if (!enabled) continue;
      for (std::size_t l = 0; l < config.layers; ++l) {
        const auto lp = prefix + "." + name + ".layer" + std::to_string(l);
        add_linear(params, lp + ".q", d, d, rng);
        add_linear(params, lp + ".k", d, d, rng);
        add_linear(params, lp + ".v", d, d, rng);
        add_linear(params, lp + ".o", d, d, rng);
        add_layer_norm(params, lp + ".ln1", d);
        add_linear(params, lp + ".ff1", d, d * config.ffn_mult, rng);
        add_linear(params, lp + ".ff2", d * config.ffn_mult, d, rng);
        add_layer_norm(params, lp + ".ln2", d);
      }
      add_matrix(params, prefix + "." + name + ".gate", d, d, rng);
    }
    add_linear(params, prefix + ".unify", names.size() * d, d, rng);
  }
}

#define VEGA_INSTANTIATE_ENCODER(T)                                                                 \
  template TransformerLayerRef<T> transformer_layer_ref<T>(const ParamStore<T>&, const std::string&); \
  template ConversationInput<T> gather_conversation<T>(const Dataset&, const Conversation&);         \
  template Tensor<T> temporal_conv_block<T>(Tape<T>&, const Tensor<T>&, std::size_t,                \
                                            const LinearRef<T>&);                                   \
  template Tensor<T> add_position_speaker<T>(Tape<T>&, const Tensor<T>&,                            \
                                             const std::vector<std::size_t>&, const Tensor<T>&,     \
                                             const Tensor<T>&);                                     \
  template Tensor<T> attention<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&,                     \
                                  const TransformerLayerRef<T>&, std::size_t);                      \
  template Tensor<T> contextual_transformer<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&,        \
                                               const std::vector<TransformerLayerRef<T>>&,          \
                                               std::size_t, const DropoutContext&);                 \
  template Tensor<T> gate_stream<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> unify_modality<T>(Tape<T>&, const std::vector<Tensor<T>>&,                     \
                                       const LinearRef<T>&);                                        \
  template std::array<Tensor<T>, kNumModalities> encode_conversation<T>(                            \
      Tape<T>&, const ParamStore<T>&, const ModelConfig&, const ConversationInput<T>&,              \
      const DropoutContext&);                                                                       \
  template void init_encoder_params<T>(ParamStore<T>&, const ModelConfig&, Rng&);

VEGA_INSTANTIATE_ENCODER(float)
VEGA_INSTANTIATE_ENCODER(double)

}  // namespace vega
