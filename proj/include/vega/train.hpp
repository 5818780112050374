#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "vega/anchors.hpp"
#include "vega/metrics.hpp"
#include "vega/objective.hpp"
#include "vega/optim.hpp"

namespace vega {

struct TrainOptions {
  std::size_t epochs = 30;
  std::size_t batch_size = 15;  // conversations per step
  std::size_t patience = 10;    // epochs without a better validation w-F1
  bool log_steps = true;

  void validate() const;
};

struct TrainSetup {
  ModelConfig model;
  LossWeights weights;
  ObjectivePlan plan;
  SamplingPolicy sampling;
  AdamWConfig optim;
  TrainOptions options;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  std::size_t steps = 0;
  double mean_total = 0.0;
  MetricsReport validation;
  bool improved = false;
};

struct TrainResult {
  ParamStore<float> initial;
  ParamStore<float> best;   // parameters of the best validation epoch
  std::size_t best_epoch = 0;  // 0 when no epoch ran
  MetricsReport best_validation;
  std::vector<EpochRecord> epochs;
  std::size_t steps = 0;
};

/// Raised when any loss term turns non-finite.
class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Trains from a fresh initialization. One anchor per class is sampled per
/// step; validation runs after every epoch with dropout off and the anchor
/// branch bypassed. When `log` is set, one JSON object per step and per
/// epoch is written to it.
TrainResult train(const Dataset& train_set, const Dataset& val_set, const AnchorSet& anchors,
                  const TrainSetup& setup, std::ostream* log = nullptr);

/// Supervision-branch predictions over `dataset`, scored against its labels.
MetricsReport evaluate(const ParamStore<float>& params, const ModelConfig& config,
                       const Dataset& dataset);

// Checkpoint: "VCK1", then per parameter u32 path_len, path bytes, u32 rank,
// rank x u32 dims, binary32 payload; little-endian, in store order.
std::vector<std::uint8_t> encode_checkpoint(const ParamStore<float>& params);
ParamStore<float> decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& origin);
void save_checkpoint(const std::filesystem::path& path, const ParamStore<float>& params);
ParamStore<float> load_checkpoint(const std::filesystem::path& path);

/// Fills the dataset-derived fields of a model config (class count, input
/// widths, speaker count, anchor width).
void bind_to_data(ModelConfig& config, const Dataset& dataset, std::size_t anchor_dim);

}  // namespace vega
