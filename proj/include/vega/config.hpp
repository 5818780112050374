#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "vega/train.hpp"

namespace vega {

struct DataConfig {
  std::string manifest;
  std::string anchors;  // empty: the manifest directory's anchors.vea
  SplitRatios split;
  std::uint64_t split_seed = 0;
};

/// Everything a training run needs. The dataset-derived model fields (class
/// count, input widths, speakers, anchor width) are filled at load time and
/// are not part of the schema.
///
/// JSON layout:
///   {"data":     {"manifest", "anchors", "split": [train, val, test], "split_seed"},
///    "model":    {"hidden", "half_window", "heads", "layers", "ffn_mult", "dropout",
///                 "max_positions", "modalities": "TAV", "use_positional", "use_speaker",
///                 "use_intra", "use_inter", "projection_hidden", "projection_dropout",
///                 "shared_projection", "shared_gate", "vega_head", "branch"},
///    "loss":     {"cls_fuse", "cls_uni", "dist", "anc_fuse", "anc_uni", "anc_dist"},
///    "sampling": {"q", "images_per_class"},
///    "optim":    {"lr", "weight_decay", "beta1", "beta2", "eps"},
///    "train":    {"epochs", "batch_size", "patience", "log_steps"},
///    "ablation": "full", "seeds": [0]}
/// Every key is optional; unknown keys are rejected.
struct RunConfig {
  DataConfig data;
  ModelConfig model;
  LossWeights loss;
  SamplingPolicy sampling;
  std::size_t images_per_class = 0;  // 0 keeps every instance
  AdamWConfig optim;
  TrainOptions train;
  std::string ablation = "full";
  std::vector<std::uint64_t> seeds{0};

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void validate() const;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parses "1..10", "3" or "1,4,7" into a seed list.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

/// "TAV", "TA", ... -> modality flags.
std::array<bool, kNumModalities> parse_modalities(const std::string& text);
std::string format_modalities(const std::array<bool, kNumModalities>& flags);

}  // namespace vega
