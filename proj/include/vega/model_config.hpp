#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "vega/data.hpp"

namespace vega {

enum class BranchMode {
  Dual,    // supervision and anchoring heads are separate
  Single,  // features are projected to anchor space first, then classified
};

const char* to_string(BranchMode mode);
BranchMode branch_mode_from_string(const std::string& name);

/// Architecture of the encoder and both heads.
///
/// Defaults follow the reference setup (hidden width 1280, 8 heads, dropout
/// 0.5 in encoder and classifiers, projection dropout 0.4). Depth and
/// feed-forward width are not given there; we default to one layer and a
/// feed-forward width equal to the hidden width.
struct ModelConfig {
  std::size_t num_classes = 6;
  std::array<std::size_t, kNumModalities> input_dims{1024, 1582, 342};
  std::array<bool, kNumModalities> modalities{true, true, true};

  std::size_t hidden = 1280;
  std::size_t half_window = 1;  // temporal conv kernel is 2k+1 wide
  std::size_t heads = 8;
  std::size_t layers = 1;
  std::size_t ffn_mult = 1;
  double dropout = 0.5;
  std::size_t max_positions = 512;
  std::size_t num_speakers = 2;
  bool use_positional = true;
  bool use_speaker = true;
  bool use_intra = true;
  bool use_inter = true;

  std::size_t anchor_dim = 768;
  std::size_t projection_hidden = 0;  // 0 derives it from hidden and anchor_dim
  double projection_dropout = 0.4;
  bool shared_projection = true;
  bool shared_gate = true;
  bool vega_head = true;
  BranchMode branch = BranchMode::Dual;

  /// (hidden + anchor_dim) / 2 rounded to the nearest multiple of 64 (at
  /// least 64), unless projection_hidden overrides it.
  std::size_t projection_width() const;
  std::vector<Modality> active_modalities() const;
  bool is_active(Modality m) const { return modalities[index_of(m)]; }
  /// Width of the features fed to the label classifiers.
  std::size_t classifier_input() const { return branch == BranchMode::Single ? anchor_dim : hidden; }

  void validate() const;
};

}  // namespace vega
