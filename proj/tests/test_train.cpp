#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "test_util.hpp"
#include "vega/config.hpp"
#include "vega/model.hpp"
#include "vega/train.hpp"

using namespace vega;

namespace {

struct SmallRun {
  SynthData data;
  DatasetSplit parts;
  AnchorSet anchors;
  TrainSetup setup;
};

SmallRun small_run(std::uint64_t seed, const std::string& mode = "full") {
  SynthOptions so;
  so.num_conversations = 12;
  so.utterances_per_conversation = 6;
  so.dims = {8, 6, 5};
  so.anchor_dim = 8;
  so.anchors_per_class = 4;
  so.seed = seed;
  SmallRun r{synth_generate(so), {}, AnchorSet({"x"}, {{{1.0f}}}), {}};
  r.parts = split(r.data.dataset, {}, seed);
  r.anchors = AnchorSet::from_file(r.data.anchors);
  r.setup.model.hidden = 8;
  r.setup.model.heads = 2;
  r.setup.model.max_positions = 16;
  r.setup.plan = apply_ablation(mode, r.setup.model);
  bind_to_data(r.setup.model, r.data.dataset, r.anchors.dim());
  r.setup.options.epochs = 3;
  r.setup.options.batch_size = 4;
  r.setup.options.log_steps = false;
  r.setup.seed = seed;
  return r;
}

std::vector<double> val_trajectory(const TrainResult& r) {
  std::vector<double> out;
  for (const auto& e : r.epochs) {
    out.push_back(e.validation.accuracy);
    out.push_back(e.validation.weighted_f1);
  }
  return out;
}

}  // namespace

TEST_CASE("AdamW") {
  SUBCASE("zero gradient, no decay") {
    ParamStore<double> p;
    p.add("w", Tensor<double>({3}, {1, -2, 0.5}));
    p.zero_grad();
    AdamW<double> opt({0.1, 0.0});
    opt.step(p);
    CHECK(p.get("w").values()[1] == -2.0);
  }
  SUBCASE("zero gradient, decay only") {
    ParamStore<double> p;
    p.add("w", Tensor<double>({2}, {1, -2}));
    p.zero_grad();
    AdamW<double> opt({0.01, 0.5});
    opt.step(p);
    CHECK(p.get("w").values()[0] == doctest::Approx(1 * (1 - 0.005)).epsilon(1e-15));
    CHECK(p.get("w").values()[1] == doctest::Approx(-2 * (1 - 0.005)).epsilon(1e-15));
  }
  SUBCASE("quadratic bowl against a scalar oracle") {
    const double target = 3.0, lr = 0.05, wd = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ParamStore<double> p;
    p.add("w", Tensor<double>({1}, {-1.0}));
    AdamW<double> opt({lr, wd, b1, b2, eps});
    double w = -1.0, m = 0, v = 0;
    for (int t = 1; t <= 100; ++t) {
      p.zero_grad();
      const double cur = p.get("w").values()[0];
      p.get("w").mutable_grad()[0] = 2 * (cur - target);
      opt.step(p);
      const double g = 2 * (w - target);
      w -= lr * wd * w;
      m = b1 * m + (1 - b1) * g;
      v = b2 * v + (1 - b2) * g * g;
      w -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
      REQUIRE(std::abs(p.get("w").values()[0] - w) < 1e-5);
    }
    CHECK(opt.steps() == 100);
  }
  SUBCASE("missing gradient") {
    ParamStore<double> p;
    p.add("w", Tensor<double>({1}, {1.0}));
    AdamW<double> opt;
    CHECK_THROWS_AS(opt.step(p), ContractError);
  }
  CHECK_THROWS_AS(AdamW<double>(AdamWConfig{-1.0}), std::invalid_argument);
}

TEST_CASE("metrics") {
  auto r = MetricsReport::from_confusion({{2, 1}, {0, 3}});
  CHECK(r.class_f1[0] == doctest::Approx(0.8));
  CHECK(r.class_f1[1] == doctest::Approx(6.0 / 7));
  CHECK(r.weighted_f1 == doctest::Approx((3 * 0.8 + 3 * 6.0 / 7) / 6));
  CHECK(r.accuracy == doctest::Approx(5.0 / 6));
  CHECK(r.class_acc[0] == doctest::Approx(2.0 / 3));

  auto perfect = MetricsReport::from_predictions({0, 1, 2, 2}, {0, 1, 2, 2}, 3);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.weighted_f1 == 1.0);

  // Equal supports: weighted and macro F1 coincide.
  auto eq = MetricsReport::from_confusion({{3, 1, 0}, {2, 2, 0}, {0, 1, 3}});
  CHECK(eq.weighted_f1 == doctest::Approx(eq.macro_f1));

  // A class never predicted scores F1 0 rather than NaN.
  auto none = MetricsReport::from_confusion({{2, 0}, {1, 0}});
  CHECK(none.class_f1[1] == 0.0);

  CHECK_THROWS(MetricsReport::from_predictions({0, 1}, {0}, 2));
  CHECK_THROWS(MetricsReport::from_predictions({0, 2}, {0, 1}, 2));
  CHECK(r.to_json().contains("w_f1"));
  CHECK(r.format({"a", "b"}).find("overall") != std::string::npos);
}

TEST_CASE("checkpoint round trip") {
  auto run = small_run(1);
  auto params = init_model_params<float>(run.setup.model, 4);
  auto bytes = encode_checkpoint(params);
  CHECK(identical(decode_checkpoint(bytes, "mem"), params));
  TempDir dir;
  save_checkpoint(dir / "c.vck", params);
  CHECK(identical(load_checkpoint(dir / "c.vck"), params));
  bytes[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bytes, "mem"), DataError);
  auto cut = encode_checkpoint(params);
  cut.resize(cut.size() - 3);
  CHECK_THROWS_AS(decode_checkpoint(cut, "mem"), DataError);
}

TEST_CASE("training basics") {
  auto run = small_run(2);
  SUBCASE("zero epochs keeps the initialization") {
    run.setup.options.epochs = 0;
    auto r = train(run.parts.train, run.parts.val, run.anchors, run.setup);
    CHECK(r.best_epoch == 0);
    CHECK(identical(r.best, r.initial));
    CHECK(identical(r.initial, init_model_params<float>(run.setup.model, run.setup.seed)));
  }
  SUBCASE("same seed, same bytes") {
    std::ostringstream la, lb;
    auto a = train(run.parts.train, run.parts.val, run.anchors, run.setup, &la);
    auto b = train(run.parts.train, run.parts.val, run.anchors, run.setup, &lb);
    CHECK(encode_checkpoint(a.best) == encode_checkpoint(b.best));
    CHECK(la.str() == lb.str());
    CHECK(!la.str().empty());
    CHECK(a.epochs.size() == 3);
    CHECK(a.steps == 3 * 3);  // 9-10 training conversations, batches of 4
  }
  SUBCASE("evaluation is repeatable") {
    auto params = init_model_params<float>(run.setup.model, 0);
    auto e1 = evaluate(params, run.setup.model, run.parts.val);
    auto e2 = evaluate(params, run.setup.model, run.parts.val);
    CHECK(e1.confusion == e2.confusion);
    CHECK(e1.weighted_f1 == e2.weighted_f1);
  }
  SUBCASE("losses stay finite") {
    for (std::uint64_t s : {0, 1, 2}) {
      auto r2 = small_run(s);
      auto res = train(r2.parts.train, r2.parts.val, r2.anchors, r2.setup);
      for (const auto& e : res.epochs) CHECK(std::isfinite(e.mean_total));
    }
  }
}

TEST_CASE("non-finite loss stops the run") {
  auto run = small_run(3);
  auto table = std::make_shared<FeatureTable>(*run.parts.train.features[0]);
  for (auto& v : table->values) v = std::numeric_limits<float>::infinity();
  run.parts.train.features[0] = table;
  try {
    train(run.parts.train, run.parts.val, run.anchors, run.setup);
    FAIL("expected NonFiniteLoss");
  } catch (const NonFiniteLoss& e) {
    CHECK(std::string(e.what()).find("step 1") != std::string::npos);
  }
}

TEST_CASE("zero VEGA weights match an absent VEGA head") {
  auto run = small_run(4);
  for (auto t : {Term::AncFuse, Term::AncUni, Term::AncDist}) run.setup.weights.set(t, 0.0);
  auto zeroed = train(run.parts.train, run.parts.val, run.anchors, run.setup);

  auto bare = small_run(4, "cls-only");
  bare.setup.model.vega_head = false;
  auto absent = train(bare.parts.train, bare.parts.val, bare.anchors, bare.setup);
  CHECK(param_count(absent.best).vega == 0);
  CHECK(val_trajectory(zeroed) == val_trajectory(absent));
  CHECK(predict(zeroed.best, run.setup.model, run.parts.test) ==
        predict(absent.best, bare.setup.model, bare.parts.test));
}

TEST_CASE("run config") {
  auto c = RunConfig::from_json(nlohmann::json::parse(R"({"model": {"hidden": 32, "modalities": "TA"},
      "loss": {"anc_dist": 0.5}, "train": {"epochs": 4}, "seeds": [1, 2]})"));
  CHECK(c.model.hidden == 32);
  CHECK(!c.model.modalities[2]);
  CHECK(c.loss.get(Term::AncDist) == 0.5);
  CHECK(c.train.epochs == 4);
  CHECK(c.seeds == std::vector<std::uint64_t>{1, 2});
  auto back = RunConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());

  CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json::parse(R"({"modle": {}})")), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json::parse(R"({"model": {"hiden": 3}})")), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json::parse(R"({"model": {"hidden": "big"}})")), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json::parse(R"({"model": {"modalities": "TX"}})")), ConfigError);

  CHECK(parse_seed_list("1..4") == std::vector<std::uint64_t>{1, 2, 3, 4});
  CHECK(parse_seed_list("7") == std::vector<std::uint64_t>{7});
  CHECK(parse_seed_list("1,4,7") == std::vector<std::uint64_t>{1, 4, 7});
  CHECK(parse_seed_list("0..1,5") == std::vector<std::uint64_t>{0, 1, 5});
  CHECK_THROWS_AS(parse_seed_list("3..1"), ConfigError);
  CHECK_THROWS_AS(parse_seed_list("a"), ConfigError);
  CHECK_THROWS_AS(parse_seed_list(""), ConfigError);
}
