#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vega/ops.hpp"

namespace vega {

struct GradcheckOptions {
  double step = 1e-4;       // central difference step
  double tolerance = 1e-3;  // on |a - n| / max(|a|, |n|, floor)
  double floor = 1e-6;      // keeps near-zero gradients from dominating
};

struct GradcheckResult {
  std::string name;
  std::size_t checked = 0;  // gradient entries compared
  double max_error = 0.0;
  std::string worst;        // location of the largest error
  bool passed = true;
};

using ScalarFn = std::function<Tensor<double>(Tape<double>&, const std::vector<Tensor<double>>&)>;

/// Compares reverse-mode gradients of `fn` wrt every entry of `inputs` with
/// central differences. `fn` must be deterministic (reseed any rng inside).
GradcheckResult check_gradients(const std::string& name, const ScalarFn& fn,
                                std::vector<Tensor<double>> inputs, const GradcheckOptions& options = {},
                                const std::vector<std::string>& names = {});

/// Every differentiable op on random shapes drawn from `seed`.
std::vector<GradcheckResult> op_gradchecks(std::uint64_t seed, const GradcheckOptions& options = {});

/// Full objective (all six terms, dropout on, replayed) of a tiny model on a
/// two-utterance synthetic conversation, checked against every parameter.
GradcheckResult objective_gradcheck(std::uint64_t seed, const GradcheckOptions& options = {});

}  // namespace vega
