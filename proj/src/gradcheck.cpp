#include "vega/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "vega/anchors.hpp"
#include "vega/objective.hpp"

namespace vega {

GradcheckResult check_gradients(const std::string& name, const ScalarFn& fn,
                                std::vector<Tensor<double>> inputs, const GradcheckOptions& options,
                                const std::vector<std::string>& names) {
  GradcheckResult result;
  result.name = name;
  for (auto& x : inputs) {
    x.set_requires_grad(true);
    x.clear_grad();
  }

  Tape<double> tape;
  auto loss = fn(tape, inputs);
  if (loss.numel() != 1) throw ContractError(name + ": gradcheck function must return a scalar");
  if (tape.size() > 0) tape.backward(loss);

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto values = inputs[i].values();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double analytic = inputs[i].has_grad() ? inputs[i].grad()[k] : 0.0;
      const double saved = values[k];
      values[k] = saved + options.step;
      Tape<double> plus_tape(false);
      const double plus = fn(plus_tape, inputs).item();
      values[k] = saved - options.step;
      Tape<double> minus_tape(false);
      const double minus = fn(minus_tape, inputs).item();
      values[k] = saved;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
      const double err = std::abs(analytic - numeric) / denom;
      ++result.checked;
      if (result.checked == 1 || !(err <= result.max_error)) {
        result.max_error = std::isfinite(err) ? err : INFINITY;
        result.worst = (i < names.size() ? names[i] : "input " + std::to_string(i)) + " entry " + std::to_string(k) + ": analytic " +
                       std::to_string(analytic) + ", numeric " + std::to_string(numeric);
      }
    }
  }
  result.passed = result.max_error <= options.tolerance;
  return result;
}

namespace {

struct Gen {
  Rng rng;
  Tensor<double> tensor(Shape shape, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(numel(shape));
    for (auto& x : v) x = u(rng);
    return Tensor<double>(std::move(shape), std::move(v));
  }
  std::size_t dim(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  }
};

// Contracts an arbitrary output against fixed random weights so every output
// entry contributes to the checked gradient.
Tensor<double> contract(Tape<double>& tape, const Tensor<double>& out, std::uint64_t seed) {
  Gen g{Rng(seed)};
  auto w = g.tensor(out.shape());
  return sum(tape, mul(tape, out, w));
}

}  // namespace

std::vector<GradcheckResult> op_gradchecks(std::uint64_t seed, const GradcheckOptions& options) {
  Gen g{make_rng(seed, Stream::Synth)};
  const std::uint64_t cw = seed * 7919 + 17;
  std::vector<GradcheckResult> out;
  auto run = [&](const std::string& name, const ScalarFn& fn, std::vector<Tensor<double>> inputs) {
    out.push_back(check_gradients(name, fn, std::move(inputs), options));
  };
  auto wrap = [cw](auto op) {
    return [op, cw](Tape<double>& t, const std::vector<Tensor<double>>& x) { return contract(t, op(t, x), cw); };
  };
  using Ins = std::vector<Tensor<double>>;

  const std::size_t m = g.dim(1, 4), k = g.dim(1, 5), n = g.dim(1, 4);
  run("matmul", wrap([](auto& t, const Ins& x) { return matmul(t, x[0], x[1]); }), {g.tensor({m, k}), g.tensor({k, n})});
  run("transpose", wrap([](auto& t, const Ins& x) { return transpose(t, x[0]); }), {g.tensor({m, k})});
  run("add", wrap([](auto& t, const Ins& x) { return add(t, x[0], x[1]); }), {g.tensor({m, k}), g.tensor({m, k})});
  run("add_broadcast", wrap([](auto& t, const Ins& x) { return add(t, x[0], x[1]); }), {g.tensor({m, k}), g.tensor({k})});
  run("mul", wrap([](auto& t, const Ins& x) { return mul(t, x[0], x[1]); }), {g.tensor({m, k}), g.tensor({m, k})});
  run("mul_broadcast", wrap([](auto& t, const Ins& x) { return mul(t, x[0], x[1]); }), {g.tensor({m, k}), g.tensor({k})});
  run("mul_scalar", wrap([](auto& t, const Ins& x) { return mul(t, x[0], x[1]); }), {g.tensor({m, k}), g.tensor({})});
  run("scale", wrap([](auto& t, const Ins& x) { return scale(t, x[0], 1.7); }), {g.tensor({m, k})});
  run("neg", wrap([](auto& t, const Ins& x) { return neg(t, x[0]); }), {g.tensor({m, k})});
  run("linear", wrap([](auto& t, const Ins& x) { return linear(t, x[0], x[1], x[2]); }),
      {g.tensor({m, k}), g.tensor({k, n}), g.tensor({n})});
  run("concat_rows", wrap([](auto& t, const Ins& x) { return concat(t, x, 0); }), {g.tensor({m, k}), g.tensor({n, k})});
  run("concat_cols", wrap([](auto& t, const Ins& x) { return concat(t, x, 1); }), {g.tensor({m, k}), g.tensor({m, n})});
  {
    const std::size_t cols = k + 2, start = g.dim(0, 2), len = g.dim(1, cols - start);
    run("slice", wrap([=](auto& t, const Ins& x) { return slice(t, x[0], 1, start, len); }), {g.tensor({m, cols})});
  }
  run("reshape", wrap([=](auto& t, const Ins& x) { return reshape(t, x[0], {k, m}); }), {g.tensor({m, k})});
  run("sum", [](auto& t, const Ins& x) { return sum(t, x[0]); }, {g.tensor({m, k})});
  run("mean", [](auto& t, const Ins& x) { return mean(t, x[0]); }, {g.tensor({m, k})});
  run("sigmoid", wrap([](auto& t, const Ins& x) { return sigmoid(t, x[0]); }), {g.tensor({m, k}, -3, 3)});
  run("silu", wrap([](auto& t, const Ins& x) { return silu(t, x[0]); }), {g.tensor({m, k}, -3, 3)});
  run("log", wrap([](auto& t, const Ins& x) { return log(t, x[0]); }), {g.tensor({m, k}, 0.2, 3.0)});
  run("exp", wrap([](auto& t, const Ins& x) { return exp(t, x[0]); }), {g.tensor({m, k})});
  {
    std::vector<std::size_t> idx(n + 1);
    for (auto& i : idx) i = g.dim(0, m - 1);
    run("embedding_lookup", wrap([idx](auto& t, const Ins& x) { return embedding_lookup(t, x[0], idx); }),
        {g.tensor({m, k})});
  }
  run("dropout", wrap([seed](auto& t, const Ins& x) {
        auto rng = make_rng(seed, Stream::Dropout);
        return dropout(t, x[0], 0.4, rng, true);
      }),
      {g.tensor({m + 2, k + 2})});
  run("layer_norm", wrap([](auto& t, const Ins& x) { return layer_norm(t, x[0], 1); }), {g.tensor({m, k + 2})});
  run("layer_norm_axis0", wrap([](auto& t, const Ins& x) { return layer_norm(t, x[0], 0); }), {g.tensor({m + 2, k})});
  run("softmax", wrap([](auto& t, const Ins& x) { return softmax(t, x[0], 1); }), {g.tensor({m, k + 1}, -2, 2)});
  run("softmax_axis0", wrap([](auto& t, const Ins& x) { return softmax(t, x[0], 0); }), {g.tensor({m + 1, k}, -2, 2)});
  run("kl_div", wrap([](auto& t, const Ins& x) { return kl_div(t, softmax(t, x[0], 1), softmax(t, x[1], 1)); }),
      {g.tensor({m, k + 1}, -2, 2), g.tensor({m, k + 1}, -2, 2)});
  run("cosine_sim", [](auto& t, const Ins& x) { return cosine_sim(t, x[0], x[1]); }, {g.tensor({k + 1}), g.tensor({k + 1})});
  run("cosine_sim_matrix", wrap([](auto& t, const Ins& x) { return cosine_sim_matrix(t, x[0], x[1]); }),
      {g.tensor({m, k + 1}), g.tensor({n, k + 1})});
  {
    std::vector<std::size_t> labels(m);
    for (auto& l : labels) l = g.dim(0, k);
    run("nll", wrap([labels](auto& t, const Ins& x) { return nll(t, softmax(t, x[0], 1), labels); }),
        {g.tensor({m, k + 1}, -2, 2)});
  }
  {
    const std::size_t hw = g.dim(0, 2);
    run("unfold_time", wrap([hw](auto& t, const Ins& x) { return unfold_time(t, x[0], hw); }), {g.tensor({m + 1, k})});
  }
  run("scale_rows", wrap([](auto& t, const Ins& x) { return scale_rows(t, x[0], x[1]); }), {g.tensor({m, k}), g.tensor({m})});
  for (auto& r : out) r.name += " [seed " + std::to_string(seed) + "]";
  return out;
}

GradcheckResult objective_gradcheck(std::uint64_t seed, const GradcheckOptions& options) {
  SynthOptions so;
  so.num_classes = 3;
  so.num_conversations = 1;
  so.utterances_per_conversation = 2;
  so.dims = {5, 4, 3};
  so.anchor_dim = 12;
  so.anchors_per_class = 2;
  so.separation = 1.0;
  so.seed = seed;
  auto data = synth_generate(so);

  ModelConfig config;
  config.num_classes = 3;
  config.input_dims = so.dims;
  config.hidden = 8;
  config.heads = 2;
  config.anchor_dim = so.anchor_dim;
  config.num_speakers = so.num_speakers;
  config.projection_hidden = 10;
  config.max_positions = 8;

  auto params = init_model_params<double>(config, seed);
  auto input = gather_conversation<double>(data.dataset, data.dataset.conversations.front());
  AnchorSet anchors = AnchorSet::from_file(data.anchors);
  auto anchor_rng = make_rng(seed, Stream::Anchors);
  SamplingPolicy policy;
  policy.q = 0.5;
  auto sampled = sample_anchor_matrix<double>(anchors, policy, anchor_rng);
  ObjectivePlan plan;
  LossWeights weights;

  std::vector<std::string> paths;
  std::vector<Tensor<double>> inputs;
  for (const auto& [path, t] : params) {
    paths.push_back(path);
    inputs.push_back(t);
  }
  auto run_forward = [&](Tape<double>& tape) {
    auto dropout_rng = make_rng(seed, Stream::Dropout);
    auto vega_rng = make_rng(seed, Stream::VegaDropout);
    ForwardOptions fo;
    fo.train = true;
    fo.dropout_rng = &dropout_rng;
    fo.vega_dropout_rng = &vega_rng;
    return forward(tape, params, config, {input}, fo, sampled);
  };
  FrozenTeachers<double> frozen;
  {
    Tape<double> probe(false);
    frozen = teachers_of(run_forward(probe), plan);
  }
  auto fn = [&](Tape<double>& tape, const std::vector<Tensor<double>>&) {
    return compute_objective(tape, run_forward(tape), weights, plan, frozen).total;
  };
  // The closure reads the store directly; the inputs alias its tensors.
  auto result = check_gradients("objective [seed " + std::to_string(seed) + "]", fn, inputs, options, paths);
  return result;
}

}  // namespace vega
