#pragma once

// Small shared setups for the objective tests and the acceptance run.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "vega/anchors.hpp"
#include "vega/objective.hpp"

namespace vega::fixtures {

struct TinyProblem {
  SynthData data;
  ModelConfig config;
  AnchorSet anchors;
  std::vector<ConversationInput<double>> batch;
};

inline TinyProblem tiny_problem(std::uint64_t seed) {
  SynthOptions so;
  so.num_classes = 4;
  so.num_conversations = 2;
  so.utterances_per_conversation = 3;
  so.dims = {6, 5, 4};
  so.anchor_dim = 10;
  so.anchors_per_class = 3;
  so.separation = 2.0;
  so.seed = seed;
  TinyProblem p{synth_generate(so), {}, AnchorSet({"x"}, {{{1.0f}}}), {}};
  p.anchors = AnchorSet::from_file(p.data.anchors);
  p.config.num_classes = so.num_classes;
  p.config.input_dims = so.dims;
  p.config.hidden = 8;
  p.config.heads = 2;
  p.config.anchor_dim = so.anchor_dim;
  p.config.max_positions = 8;
  for (const auto& c : p.data.dataset.conversations) p.batch.push_back(gather_conversation<double>(p.data.dataset, c));
  return p;
}

/// Gradients of the total objective, by parameter path, for one train-mode
/// step with fixed dropout and anchor draws.
inline std::map<std::string, std::vector<double>> objective_gradients(const TinyProblem& p, const LossWeights& w,
                                                                      const ObjectivePlan& plan, std::uint64_t seed) {
  auto params = init_model_params<double>(p.config, seed);
  params.zero_grad();
  auto arng = make_rng(seed, Stream::Anchors);
  SamplingPolicy policy;
  auto anchors = sample_anchor_matrix<double>(p.anchors, policy, arng);
  auto drng = make_rng(seed, Stream::Dropout), vrng = make_rng(seed, Stream::VegaDropout);
  ForwardOptions fo;
  fo.train = true;
  fo.dropout_rng = &drng;
  fo.vega_dropout_rng = &vrng;
  Tape<double> tape;
  auto out = forward(tape, params, p.config, p.batch, fo, anchors);
  auto obj = compute_objective(tape, out, w, plan);
  tape.backward(obj.total);
  std::map<std::string, std::vector<double>> g;
  for (const auto& [path, t] : params) g[path] = std::vector<double>(t.grad().begin(), t.grad().end());
  return g;
}

/// Terms an ablation mode drops from the objective.
inline std::vector<Term> dropped_terms(const std::string& mode) {
  ModelConfig scratch;
  auto plan = apply_ablation(mode, scratch);
  std::vector<Term> out;
  for (auto t : kAllTerms)
    if (!plan.has(t)) out.push_back(t);
  return out;
}

/// Largest absolute gradient difference between zeroing the dropped terms'
/// weights and removing them from the graph.
inline double ledger_gap(const TinyProblem& p, const std::string& mode, std::uint64_t seed) {
  LossWeights zeroed;
  for (auto t : dropped_terms(mode)) zeroed.set(t, 0.0);
  ModelConfig scratch = p.config;
  const auto reduced_plan = apply_ablation(mode, scratch);
  const auto a = objective_gradients(p, zeroed, ObjectivePlan{}, seed);
  const auto b = objective_gradients(p, LossWeights{}, reduced_plan, seed);
  double gap = 0;
  for (const auto& [path, ga] : a) {
    const auto& gb = b.at(path);
    for (std::size_t i = 0; i < ga.size(); ++i) gap = std::max(gap, std::abs(ga[i] - gb[i]));
  }
  return gap;
}

inline const std::vector<std::string>& loss_ablation_modes() {
  static const std::vector<std::string> modes{"no-anc-fuse", "no-anc-uni", "no-anc-dist", "cls-only", "anchor-only"};
  return modes;
}

}  // namespace vega::fixtures
