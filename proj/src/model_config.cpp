#include "vega/model_config.hpp"

#include <stdexcept>

namespace vega {

const char* to_string(BranchMode mode) {
  return mode == BranchMode::Dual ? "dual" : "single";
}

BranchMode branch_mode_from_string(const std::string& name) {
  if (name == "dual") return BranchMode::Dual;
  if (name == "single") return BranchMode::Single;
  throw std::invalid_argument("unknown branch mode '" + name + "' (expected dual or single)");
}

std::size_t ModelConfig::projection_width() const {
  if (projection_hidden != 0) return projection_hidden;
  const std::size_t mid = (hidden + anchor_dim) / 2;
  const std::size_t rounded = ((mid + 32) / 64) * 64;
  return rounded == 0 ? 64 : rounded;
}

std::vector<Modality> ModelConfig::active_modalities() const {
  std::vector<Modality> out;
  for (auto m : kAllModalities) {
    if (is_active(m)) out.push_back(m);
  }
  return out;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("model config: " + msg); };
  if (num_classes < 2) fail("num_classes must be >= 2");
  if (active_modalities().empty()) fail("at least one modality must be active");
  for (auto m : active_modalities()) {
    if (input_dims[index_of(m)] == 0) fail(std::string("input dim of ") + modality_tag(m) + " is zero");
  }
  if (hidden == 0 || heads == 0) fail("hidden and heads must be positive");
  if (hidden % heads != 0) {
    fail("hidden (" + std::to_string(hidden) + ") must be divisible by heads (" +
         std::to_string(heads) + ")");
  }
  if (layers == 0 || ffn_mult == 0) fail("layers and ffn_mult must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (!(projection_dropout >= 0.0 && projection_dropout < 1.0)) fail("projection_dropout must lie in [0, 1)");
  if (max_positions == 0 || num_speakers == 0) fail("max_positions and num_speakers must be positive");
  if (anchor_dim == 0) fail("anchor_dim must be positive");
  if (branch == BranchMode::Single && !vega_head) {
    fail("single-branch mode classifies in anchor space and needs the projection head");
  }
}

}  // namespace vega
