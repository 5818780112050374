#include "vega/train.hpp"

#include <cmath>
#include <numeric>

#include "binary_io.hpp"
#include "json.hpp"

namespace vega {

using json = nlohmann::json;

void TrainOptions::validate() const {
  if (batch_size == 0) throw std::invalid_argument("train batch_size must be >= 1");
}

void bind_to_data(ModelConfig& config, const Dataset& dataset, std::size_t anchor_dim) {
  config.num_classes = dataset.classes.size();
  config.num_speakers = dataset.num_speakers;
  for (auto m : kAllModalities) {
    if (dataset.features[index_of(m)]) config.input_dims[index_of(m)] = dataset.feature_dim(m);
  }
  if (anchor_dim != 0) config.anchor_dim = anchor_dim;
}

MetricsReport evaluate(const ParamStore<float>& params, const ModelConfig& config,
                       const Dataset& dataset) {
  if (dataset.classes.size() != config.num_classes) {
    throw std::invalid_argument("dataset has " + std::to_string(dataset.classes.size()) +
                                " classes, model was built for " + std::to_string(config.num_classes));
  }
  std::vector<std::size_t> truth;
  for (const auto& conv : dataset.conversations) {
    for (const auto& u : conv.utterances) truth.push_back(u.label);
  }
  return MetricsReport::from_predictions(truth, predict(params, config, dataset), config.num_classes);
}

namespace {

void check_finite(const Objective<float>& obj, std::size_t step) {
  for (auto t : kAllTerms) {
    const auto& term = obj.terms[static_cast<std::size_t>(t)];
    if (term.defined() && !std::isfinite(term.item())) {
      throw NonFiniteLoss("non-finite loss at step " + std::to_string(step) + " in term " + term_name(t) +
                          " (value " + std::to_string(term.item()) + ")");
    }
  }
  if (!std::isfinite(obj.total.item())) {
    throw NonFiniteLoss("non-finite loss at step " + std::to_string(step) + " in the total");
  }
}

}  // namespace

TrainResult train(const Dataset& train_set, const Dataset& val_set, const AnchorSet& anchors,
                  const TrainSetup& setup, std::ostream* log) {
  const auto& config = setup.model;
  config.validate();
  setup.weights.validate();
  setup.sampling.validate();
  setup.options.validate();
  if (train_set.conversations.empty()) throw std::invalid_argument("training set has no conversations");
  if (val_set.conversations.empty()) throw std::invalid_argument("validation set has no conversations");
  const bool use_anchors = setup.plan.needs_anchors();
  if (use_anchors && !config.vega_head) {
    throw std::invalid_argument("the objective uses anchor terms but the model has no VEGA head");
  }
  if (use_anchors && (anchors.num_classes() != config.num_classes || anchors.dim() != config.anchor_dim)) {
    throw std::invalid_argument("anchor set (" + std::to_string(anchors.num_classes()) + " classes, dim " +
                                std::to_string(anchors.dim()) + ") does not match the model");
  }

  TrainResult result;
  ParamStore<float> params = init_model_params<float>(config, setup.seed);
  result.initial = params.clone();
  result.best = params.clone();

  AdamW<float> optimizer(setup.optim);
  auto dropout_rng = make_rng(setup.seed, Stream::Dropout);
  auto vega_dropout_rng = make_rng(setup.seed, Stream::VegaDropout);
  auto anchor_rng = make_rng(setup.seed, Stream::Anchors);
  auto shuffle_rng = make_rng(setup.seed, Stream::Shuffle);

  std::vector<ConversationInput<float>> inputs;
  for (const auto& conv : train_set.conversations) inputs.push_back(gather_conversation<float>(train_set, conv));
  std::vector<std::size_t> order(inputs.size());

  double best_score = -1.0;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= setup.options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(shuffle_rng, i)]);

    EpochRecord record;
    record.epoch = epoch;
    double total_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += setup.options.batch_size) {
      const std::size_t stop = std::min(order.size(), start + setup.options.batch_size);
      std::vector<ConversationInput<float>> batch;
      for (std::size_t i = start; i < stop; ++i) batch.push_back(inputs[order[i]]);

      Tensor<float> sampled;
      if (use_anchors) sampled = sample_anchor_matrix<float>(anchors, setup.sampling, anchor_rng);

      ForwardOptions fopts;
      fopts.train = true;
      fopts.dropout_rng = &dropout_rng;
      fopts.vega_dropout_rng = &vega_dropout_rng;
      Tape<float> tape;
      params.zero_grad();
      auto outputs = forward(tape, params, config, batch, fopts, sampled);
      auto objective = compute_objective(tape, outputs, setup.weights, setup.plan);
      ++result.steps;
      check_finite(objective, result.steps);
      if (tape.size() > 0 && objective.total.requires_grad()) tape.backward(objective.total);
      optimizer.step(params);

      const auto report = make_report(objective);
      total_sum += report.total;
      ++record.steps;
      if (log && setup.options.log_steps) {
        *log << json{{"type", "step"}, {"epoch", epoch}, {"step", result.steps}, {"loss", report.to_json()}}.dump()
             << '\n';
      }
    }
    record.mean_total = total_sum / static_cast<double>(record.steps);
    record.validation = evaluate(params, config, val_set);
    if (record.validation.weighted_f1 > best_score) {
      best_score = record.validation.weighted_f1;
      result.best.assign_values(params);
      result.best_epoch = epoch;
      result.best_validation = record.validation;
      record.improved = true;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (log) {
      *log << json{{"type", "epoch"},
                   {"epoch", epoch},
                   {"steps", record.steps},
                   {"mean_total", record.mean_total},
                   {"val", record.validation.to_json()},
                   {"improved", record.improved}}
                  .dump()
           << '\n';
    }
    result.epochs.push_back(std::move(record));
    if (since_best >= setup.options.patience) break;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {
constexpr std::string_view kCheckpointMagic = "VCK1";
}

std::vector<std::uint8_t> encode_checkpoint(const ParamStore<float>& params) {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic);
  for (const auto& [path, t] : params) {
    w.u32(static_cast<std::uint32_t>(path.size()));
    w.raw(path);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t.values()) w.f32(v);
  }
  return w.take();
}

ParamStore<float> decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& origin) {
  detail::ByteReader r(bytes, origin);
  if (r.raw(4, "magic") != kCheckpointMagic) {
    throw DataError(DataErrorKind::BadMagic, origin + ": not a checkpoint (bad magic)");
  }
  ParamStore<float> params;
  while (r.remaining() > 0) {
    const auto len = r.u32("path length");
    auto path = r.raw(len, "parameter path");
    const auto rank = r.u32("rank");
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(r.u32("dimension"));
    const std::size_t n = numel(shape);
    r.need(4 * n, "parameter payload");
    std::vector<float> values(n);
    for (auto& v : values) v = r.f32("value");
    params.add(std::move(path), Tensor<float>(std::move(shape), std::move(values)));
  }
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore<float>& params) {
  detail::spill(path, encode_checkpoint(params));
}

ParamStore<float> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(detail::slurp(path), path.string());
}

}  // namespace vega
