// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "vega/gradcheck.hpp"
#include "vega/model.hpp"
#include "vega/train.hpp"

using namespace vega;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::printf("%s  %-22s %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- desk-scale synthetic runs, shared by several criteria ----

struct SynthRun {
  ModelConfig model;
  DatasetSplit parts;
  AnchorSet anchors{{"x"}, {{{1.0f}}}};
  TrainResult result;
  std::string log;
  double seconds = 0;
};

SynthRun synth_run(double separation, std::uint64_t seed, const std::string& mode) {
  SynthOptions so;  // 6 classes, 60 conversations x 20 utterances
  so.separation = separation;
  so.seed = seed;
  auto data = synth_generate(so);
  SynthRun r;
  r.parts = split(data.dataset, {}, seed);
  r.anchors = AnchorSet::from_file(data.anchors);
  TrainSetup setup;
  setup.model.hidden = 64;
  setup.model.heads = 4;
  setup.plan = apply_ablation(mode, setup.model);
  bind_to_data(setup.model, data.dataset, r.anchors.dim());
  setup.options.epochs = 30;
  setup.options.log_steps = false;
  setup.seed = seed;
  r.model = setup.model;
  std::ostringstream log;
  const auto t0 = Clock::now();
  r.result = train(r.parts.train, r.parts.val, r.anchors, setup, &log);
  r.seconds = seconds_since(t0);
  r.log = log.str();
  return r;
}

std::map<std::pair<double, std::uint64_t>, SynthRun> full_runs;

const SynthRun& full_run(double separation, std::uint64_t seed) {
  auto key = std::make_pair(separation, seed);
  auto it = full_runs.find(key);
  if (it == full_runs.end()) it = full_runs.emplace(key, synth_run(separation, seed, "full")).first;
  return it->second;
}

// ---- criteria ----

void gradient_suite() {
  const auto t0 = Clock::now();
  std::size_t checks = 0, entries = 0, failed = 0;
  double worst = 0;
  std::string worst_where;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto results = op_gradchecks(seed);
    results.push_back(objective_gradcheck(seed));
    for (const auto& r : results) {
      ++checks;
      entries += r.checked;
      if (!r.passed) ++failed;
      if (r.max_error > worst) {
        worst = r.max_error;
        worst_where = r.name + " " + r.worst;
      }
    }
  }
  const double secs = seconds_since(t0);
  report(failed == 0 && secs < 120, "gradient suite",
         fmt("seeds 0-4: %zu checks, %zu entries, %zu failed, worst rel err %.2e (%s), %.1fs", checks, entries,
             failed, worst, worst_where.c_str(), secs));
}

void anchor_semantics() {
  Rng rng(2024);
  std::normal_distribution<float> g(0, 3);
  double worst = 0;
  for (std::size_t n : {1, 7, 35, 200}) {
    std::vector<std::vector<float>> xs(n, std::vector<float>(768));
    for (auto& v : xs)
      for (auto& x : v) x = g(rng);
    const auto c = build_centers({"k"}, {xs})[0];
    for (std::size_t d = 0; d < 768; ++d) {
      double s = 0, comp = 0;
      for (const auto& x : xs) {
        const double y = x[d] - comp;
        const double t = s + y;
        comp = (t - s) - y;
        s = t;
      }
      worst = std::max(worst, std::abs(c[d] - s / static_cast<double>(n)));
    }
  }
  bool ok = worst <= 1e-6;
  std::string sweep;
  for (double q : {0.0, 0.2, 0.5, 0.7, 1.0}) {
    Rng r = make_rng(7, Stream::Anchors);
    const std::size_t n = 100000;
    std::size_t centers = 0;
    for (std::size_t i = 0; i < n; ++i) centers += draw_anchor(35, SamplingPolicy{q}, r).is_center;
    const double expect = (1 - q) * n, sigma = std::sqrt(n * q * (1 - q));
    const double z = sigma > 0 ? (centers - expect) / sigma : (centers == expect ? 0.0 : INFINITY);
    ok = ok && std::abs(z) <= 3;
    sweep += fmt(" q=%.1f:%zu(z=%+.2f)", q, centers, z);
  }
  report(ok, "anchor semantics", fmt("center max err %.1e;", worst) + sweep);
}

void loss_ledger() {
  const auto p = fixtures::tiny_problem(11);
  double worst = 0;
  std::string parts;
  for (const auto& mode : fixtures::loss_ablation_modes()) {
    for (std::uint64_t seed : {0, 1, 2}) {
      const double gap = fixtures::ledger_gap(p, mode, seed);
      worst = std::max(worst, gap);
    }
    parts += " " + mode;
  }
  report(worst <= 1e-6, "loss-ledger equivalence", fmt("max grad gap %.1e over", worst) + parts);
}

void inference_overhead() {
  const auto& run = full_run(8.0, 0);
  auto bare_cfg = run.model;
  bare_cfg.vega_head = false;
  auto bare = init_model_params<float>(bare_cfg, 99);
  for (auto& [path, t] : bare) {
    const auto src = run.result.best.get(path).values();
    std::copy(src.begin(), src.end(), t.values().begin());
  }
  bool same = predict(run.result.best, run.model, run.parts.test) == predict(bare, bare_cfg, run.parts.test);
  std::size_t compared = 0;
  Tape<float> tape(false);
  for (const auto& c : run.parts.test.conversations) {
    auto in = gather_conversation<float>(run.parts.test, c);
    auto a = forward(tape, run.result.best, run.model, {in}, {});
    auto b = forward(tape, bare, bare_cfg, {in}, {});
    same = same && std::equal(a.fused_probs.values().begin(), a.fused_probs.values().end(),
                              b.fused_probs.values().begin(), b.fused_probs.values().end());
    compared += a.fused_probs.numel();
  }
  report(same, "zero inference overhead",
         fmt("%zu test utterances, %zu fused probabilities bitwise equal with head present/absent, %zu vs %zu params",
             run.parts.test.num_utterances(), compared, param_count(run.result.best).total,
             param_count(bare).total));
}

void parameter_overhead() {
  ModelConfig c;  // hidden 1280, anchor width 768
  const auto n = param_count(init_model_params<float>(c, 0));
  const double share = static_cast<double>(n.vega) / static_cast<double>(n.total);
  report(share >= 0.02 && share <= 0.10, "parameter overhead",
         fmt("VEGA head %zu of %zu params = %.2f%% (encoder %zu, supervision %zu)", n.vega, n.total, 100 * share,
             n.encoder, n.supervision));
}

void synthetic_end_to_end() {
  double acc8 = 0, test8 = 0, secs = 0, acc0 = 0, test0 = 0;
  std::string per8, per0;
  std::size_t last_best = 0;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto& r = full_run(8.0, s);
    acc8 += r.result.best_validation.accuracy / 3;
    test8 += evaluate(r.result.best, r.model, r.parts.test).accuracy / 3;
    secs += r.seconds;
    last_best = std::max(last_best, r.result.best_epoch);
    per8 += fmt(" %.3f@%zu", r.result.best_validation.accuracy, r.result.best_epoch);
    auto r0 = synth_run(0.0, s, "full");
    acc0 += r0.result.best_validation.accuracy / 3;
    test0 += evaluate(r0.result.best, r0.model, r0.parts.test).accuracy / 3;
    per0 += fmt(" %.3f", r0.result.best_validation.accuracy);
  }
  const double chance = 1.0 / 6;
  report(acc8 >= 0.95 && last_best <= 30 && secs < 300, "synthetic separable",
         fmt("sep 8: mean val ACC %.3f (per seed%s), test ACC %.3f, %.0fs for 3 runs", acc8, per8.c_str(), test8,
             secs));
  report(std::abs(acc0 - chance) <= 0.10, "synthetic chance",
         fmt("sep 0: mean val ACC %.3f (per seed%s), test ACC %.3f, chance %.3f", acc0, per0.c_str(), test0,
             chance));
}

void vega_effect() {
  std::size_t wins = 0;
  std::string detail;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto& full = full_run(8.0, s);
    const auto cls = synth_run(8.0, s, "cls-only");
    const auto centers = full.anchors.center_matrix<float>();
    const double a = anchor_alignment(full.result.best, full.model, full.parts.val, centers);
    const double b = anchor_alignment(cls.result.best, cls.model, cls.parts.val, centers);
    wins += a > b;
    detail += fmt(" s%llu %.3f/%.3f", static_cast<unsigned long long>(s), a, b);
  }
  report(wins >= 4, "VEGA effect direction", fmt("full > cls-only alignment in %zu/5 seeds:", wins) + detail);
}

void metrics_oracle() {
  struct Case {
    std::vector<std::vector<std::size_t>> confusion;
    double acc, wf1;
    std::vector<double> f1;
  };
  const std::vector<Case> cases{
      {{{2, 1}, {0, 3}}, 5.0 / 6, (0.8 + 6.0 / 7) / 2, {0.8, 6.0 / 7}},
      {{{3, 1, 0}, {2, 2, 0}, {0, 1, 3}}, 8.0 / 12, (2.0 / 3 + 0.5 + 6.0 / 7) / 3, {2.0 / 3, 0.5, 6.0 / 7}},
      {{{4, 0, 1}, {2, 0, 0}, {1, 0, 2}}, 0.6, (5 * 2.0 / 3 + 3 * 2.0 / 3) / 10, {2.0 / 3, 0.0, 2.0 / 3}},
  };
  double worst = 0;
  for (const auto& c : cases) {
    const auto r = MetricsReport::from_confusion(c.confusion);
    worst = std::max({worst, std::abs(r.accuracy - c.acc), std::abs(r.weighted_f1 - c.wf1)});
    for (std::size_t k = 0; k < c.f1.size(); ++k) worst = std::max(worst, std::abs(r.class_f1[k] - c.f1[k]));
  }
  report(worst <= 1e-6, "metrics oracle", fmt("3 confusion matrices, max err %.1e", worst));
}

void determinism() {
  const auto& first = full_run(8.0, 1);
  const auto again = synth_run(8.0, 1, "full");
  const bool ckpt = encode_checkpoint(first.result.best) == encode_checkpoint(again.result.best);
  const bool log = first.log == again.log;
  const auto ra = evaluate(first.result.best, first.model, first.parts.test).to_json().dump();
  const auto rb = evaluate(again.result.best, again.model, again.parts.test).to_json().dump();
  report(ckpt && log && ra == rb, "determinism",
         fmt("seed 1 retrained: checkpoint bytes %s, epoch log %s, test report %s", ckpt ? "equal" : "DIFFER",
             log ? "equal" : "DIFFERS", ra == rb ? "equal" : "DIFFERS"));
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  auto guarded = [](const char* name, void (*fn)()) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(false, name, std::string("threw: ") + e.what());
    }
  };
  guarded("gradient suite", gradient_suite);
  guarded("anchor semantics", anchor_semantics);
  guarded("loss-ledger equivalence", loss_ledger);
  guarded("zero inference overhead", inference_overhead);
  guarded("parameter overhead", parameter_overhead);
  guarded("synthetic", synthetic_end_to_end);
  guarded("VEGA effect direction", vega_effect);
  guarded("metrics oracle", metrics_oracle);
  guarded("determinism", determinism);
  std::printf("%d criteria failed, %.0fs total\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
