// vega: command-line front end (synth, anchors, train, eval, gradcheck).

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vega/config.hpp"
#include "vega/gradcheck.hpp"
#include "vega/train.hpp"

extern char** environ;

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace vega;

namespace {

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  SynthOptions options;
  std::string dims = "64,32,48";
  std::string out;
};

std::vector<std::size_t> parse_dims(const std::string& text) {
  std::vector<std::size_t> dims;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) dims.push_back(std::stoul(item));
  return dims;
}

int run_synth(const SynthArgs& args) {
  SynthOptions o = args.options;
  const auto dims = parse_dims(args.dims);
  if (dims.size() != 3) throw std::invalid_argument("--dims needs three comma-separated widths (T,A,V)");
  o.dims = {dims[0], dims[1], dims[2]};
  auto data = synth_generate(o);
  fs::create_directories(args.out);
  write_synth(args.out, data);
  std::cout << "wrote " << o.num_conversations << " conversations x " << o.utterances_per_conversation
            << " utterances, " << o.num_classes << " classes, dims " << dims[0] << "/" << dims[1] << "/"
            << dims[2] << ", anchors " << o.anchors_per_class << "x" << o.anchor_dim << " to "
            << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// anchors

int run_anchor_center(const std::string& in, const std::string& out) {
  auto file = read_anchor_file(in);
  auto set = AnchorSet::from_file(file);
  AnchorFile centers;
  centers.dim = file.dim;
  for (std::size_t c = 0; c < set.num_classes(); ++c) {
    auto v = set.center(c);
    centers.classes.push_back({set.classes()[c], {std::vector<float>(v.begin(), v.end())}});
  }
  write_anchor_file(out, centers);
  std::cout << "wrote " << centers.classes.size() << " center anchors (dim " << centers.dim << ") to " << out << "\n";
  return 0;
}

double mean_pairwise_cosine(const std::vector<std::vector<float>>& vs) {
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    for (std::size_t j = i + 1; j < vs.size(); ++j) {
      double dot = 0, ni = 0, nj = 0;
      for (std::size_t k = 0; k < vs[i].size(); ++k) {
        dot += double(vs[i][k]) * vs[j][k];
        ni += double(vs[i][k]) * vs[i][k];
        nj += double(vs[j][k]) * vs[j][k];
      }
      total += dot / std::max(std::sqrt(ni) * std::sqrt(nj), kEps);
      ++pairs;
    }
  }
  return pairs ? total / static_cast<double>(pairs) : NAN;
}

int run_anchor_stats(const std::string& in) {
  auto file = read_anchor_file(in);
  std::printf("%-16s %6s %6s %12s\n", "class", "n", "dim", "intra_cos");
  for (const auto& c : file.classes) {
    const double cos = mean_pairwise_cosine(c.vectors);
    if (std::isnan(cos)) {
      std::printf("%-16s %6zu %6zu %12s\n", c.name.c_str(), c.vectors.size(), file.dim, "-");
    } else {
      std::printf("%-16s %6zu %6zu %12.4f\n", c.name.c_str(), c.vectors.size(), file.dim, cos);
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// train / eval

struct TrainOverrides {
  std::string config;
  std::optional<std::string> manifest, anchors, ablation, seeds, modalities, branch;
  std::optional<std::size_t> epochs, batch_size, patience, hidden, heads, layers, images_per_class;
  std::optional<double> lr, weight_decay, q, dropout;
  std::optional<std::uint64_t> split_seed;
  std::string out = "runs";
  std::size_t jobs = 1;
};

RunConfig resolve_config(const TrainOverrides& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : RunConfig::load(o.config);
  if (o.manifest) c.data.manifest = *o.manifest;
  if (o.anchors) c.data.anchors = *o.anchors;
  if (o.split_seed) c.data.split_seed = *o.split_seed;
  if (o.ablation) c.ablation = *o.ablation;
  if (o.seeds) c.seeds = parse_seed_list(*o.seeds);
  if (o.modalities) c.model.modalities = parse_modalities(*o.modalities);
  if (o.branch) c.model.branch = branch_mode_from_string(*o.branch);
  if (o.epochs) c.train.epochs = *o.epochs;
  if (o.batch_size) c.train.batch_size = *o.batch_size;
  if (o.patience) c.train.patience = *o.patience;
  if (o.hidden) c.model.hidden = *o.hidden;
  if (o.heads) c.model.heads = *o.heads;
  if (o.layers) c.model.layers = *o.layers;
  if (o.images_per_class) c.images_per_class = *o.images_per_class;
  if (o.lr) c.optim.lr = *o.lr;
  if (o.weight_decay) c.optim.weight_decay = *o.weight_decay;
  if (o.q) c.sampling.q = *o.q;
  if (o.dropout) c.model.dropout = *o.dropout;
  if (c.data.manifest.empty()) throw ConfigError("no dataset: set data.manifest or pass --manifest");
  c.validate();
  return c;
}

fs::path anchors_path(const RunConfig& c) {
  if (!c.data.anchors.empty()) return c.data.anchors;
  return fs::path(c.data.manifest).parent_path() / "anchors.vea";
}

json bound_model(const ModelConfig& m) {
  return {{"num_classes", m.num_classes},
          {"input_dims", m.input_dims},
          {"num_speakers", m.num_speakers},
          {"anchor_dim", m.anchor_dim}};
}

int train_one_seed(const RunConfig& config, std::uint64_t seed, const fs::path& dir) {
  const Dataset dataset = load_manifest(config.data.manifest);
  const auto parts = split(dataset, config.data.split, config.data.split_seed);
  AnchorSet anchors = AnchorSet::from_file(read_anchor_file(anchors_path(config))).truncated(config.images_per_class);

  TrainSetup setup;
  setup.model = config.model;
  setup.plan = apply_ablation(config.ablation, setup.model);
  bind_to_data(setup.model, dataset, anchors.dim());
  setup.weights = config.loss;
  setup.sampling = config.sampling;
  setup.optim = config.optim;
  setup.options = config.train;
  setup.seed = seed;

  fs::create_directories(dir);
  RunConfig single = config;
  single.seeds = {seed};
  json run = single.to_json();
  run["bound"] = bound_model(setup.model);
  std::ofstream(dir / "run.json") << run.dump(2) << "\n";

  std::ofstream log(dir / "log.jsonl");
  auto result = train(parts.train, parts.val, anchors, setup, &log);
  save_checkpoint(dir / "checkpoint.vck", result.best);
  const auto test = evaluate(result.best, setup.model, parts.test);
  json summary{{"seed", seed},
               {"best_epoch", result.best_epoch},
               {"epochs_run", result.epochs.size()},
               {"steps", result.steps},
               {"val", result.best_validation.to_json()},
               {"test", test.to_json()}};
  std::ofstream(dir / "metrics.json") << summary.dump(2) << "\n";

  std::cout << "seed " << seed << ": best epoch " << result.best_epoch << " of " << result.epochs.size()
            << ", val ACC " << 100.0 * result.best_validation.accuracy << " w-F1 "
            << 100.0 * result.best_validation.weighted_f1 << "\n"
            << "test metrics:\n"
            << test.format(dataset.classes);
  return 0;
}

// One child process per seed; at most `jobs` at a time.
int fan_out(const TrainOverrides& o, const RunConfig& config) {
  const fs::path out(o.out);
  fs::create_directories(out);
  const fs::path resolved = out / "config.json";
  std::ofstream(resolved) << config.to_json().dump(2) << "\n";

  std::map<pid_t, std::uint64_t> running;
  int failures = 0;
  auto reap = [&]() {
    int status = 0;
    const pid_t pid = waitpid(-1, &status, 0);
    if (pid <= 0) return;
    const auto seed = running[pid];
    running.erase(pid);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
      std::cerr << "seed " << seed << " failed\n";
      ++failures;
    }
  };
  for (auto seed : config.seeds) {
    while (running.size() >= std::max<std::size_t>(1, o.jobs)) reap();
    std::vector<std::string> args{"/proc/self/exe", "train",   "--config", resolved.string(), "--seeds",
                                  std::to_string(seed), "--out", (out / ("seed_" + std::to_string(seed))).string()};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = 0;
    if (posix_spawn(&pid, "/proc/self/exe", nullptr, nullptr, argv.data(), environ) != 0) {
      throw std::runtime_error("cannot spawn a worker for seed " + std::to_string(seed));
    }
    running[pid] = seed;
  }
  while (!running.empty()) reap();

  // Mean and spread over the seeds that finished.
  std::vector<double> acc, wf1;
  for (auto seed : config.seeds) {
    std::ifstream in(out / ("seed_" + std::to_string(seed)) / "metrics.json");
    if (!in) continue;
    auto j = json::parse(in);
    acc.push_back(j["test"]["acc"].get<double>());
    wf1.push_back(j["test"]["w_f1"].get<double>());
  }
  auto stats = [](const std::vector<double>& v) {
    double mean = 0, var = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    for (double x : v) var += (x - mean) * (x - mean);
    return std::pair{mean, v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0};
  };
  if (!acc.empty()) {
    auto [am, as] = stats(acc);
    auto [fm, fs_] = stats(wf1);
    std::printf("test over %zu seeds: ACC %.2f +- %.2f, w-F1 %.2f +- %.2f\n", acc.size(), 100 * am, 100 * as,
                100 * fm, 100 * fs_);
  }
  return failures == 0 ? 0 : 1;
}

int run_train(const TrainOverrides& o) {
  const RunConfig config = resolve_config(o);
  if (config.seeds.size() == 1) return train_one_seed(config, config.seeds.front(), o.out);
  return fan_out(o, config);
}

int run_eval(const std::string& checkpoint, const std::string& run_path, std::optional<std::string> manifest,
             const std::string& which) {
  std::ifstream in(run_path);
  if (!in) throw ConfigError("cannot open run file " + run_path);
  json run = json::parse(in);
  json bound = run.value("bound", json::object());
  run.erase("bound");
  RunConfig config = RunConfig::from_json(run);
  if (manifest) config.data.manifest = *manifest;

  ModelConfig model = config.model;
  apply_ablation(config.ablation, model);
  const Dataset dataset = load_manifest(config.data.manifest);
  bind_to_data(model, dataset, bound.value("anchor_dim", std::size_t{0}));
  if (bound.contains("num_classes") && bound["num_classes"].get<std::size_t>() != model.num_classes) {
    throw std::invalid_argument("checkpoint was trained on " + bound["num_classes"].dump() +
                                " classes, dataset has " + std::to_string(model.num_classes));
  }
  auto params = load_checkpoint(checkpoint);
  auto reference = init_model_params<float>(model, 0);
  for (const auto& [path, t] : reference) {
    if (!params.contains(path) || params.get(path).shape() != t.shape()) {
      throw std::invalid_argument("checkpoint does not match the configured model at '" + path + "'");
    }
  }

  Dataset target;
  if (which == "all") {
    target = dataset;
  } else {
    auto parts = split(dataset, config.data.split, config.data.split_seed);
    target = which == "train" ? parts.train : which == "val" ? parts.val : parts.test;
  }
  const auto report = evaluate(params, model, target);
  std::cout << report.format(dataset.classes);
  return 0;
}

int run_gradcheck(std::uint64_t seed, std::size_t count, bool verbose) {
  int failures = 0;
  for (std::uint64_t s = seed; s < seed + count; ++s) {
    auto results = op_gradchecks(s);
    results.push_back(objective_gradcheck(s));
    for (const auto& r : results) {
      if (!r.passed || verbose) {
        std::printf("%-4s %-40s entries %6zu  max rel err %.3e  %s\n", r.passed ? "ok" : "FAIL", r.name.c_str(),
                    r.checked, r.max_error, r.passed ? "" : r.worst.c_str());
      }
      failures += r.passed ? 0 : 1;
    }
  }
  std::printf("gradcheck: %d failure(s)\n", failures);
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SDT-VEGA multimodal emotion recognition"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset and anchor file");
  synth_cmd->add_option("--classes", synth.options.num_classes, "Number of classes")->capture_default_str();
  synth_cmd->add_option("--convs", synth.options.num_conversations, "Conversations")->capture_default_str();
  synth_cmd->add_option("--utts", synth.options.utterances_per_conversation, "Utterances per conversation")
      ->capture_default_str();
  synth_cmd->add_option("--sep", synth.options.separation, "Class separation")->capture_default_str();
  synth_cmd->add_option("--seed", synth.options.seed, "Seed")->capture_default_str();
  synth_cmd->add_option("--dims", synth.dims, "Feature widths T,A,V")->capture_default_str();
  synth_cmd->add_option("--anchor-dim", synth.options.anchor_dim, "Anchor width")->capture_default_str();
  synth_cmd->add_option("--anchors-per-class", synth.options.anchors_per_class, "Anchor vectors per class")
      ->capture_default_str();
  synth_cmd->add_option("--speakers", synth.options.num_speakers, "Speakers")->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();

  auto* anchors_cmd = app.add_subcommand("anchors", "Inspect or reduce anchor files");
  anchors_cmd->require_subcommand(1);
  std::string center_in, center_out, stats_in;
  auto* center_cmd = anchors_cmd->add_subcommand("center", "Write the per-class center anchors");
  center_cmd->add_option("--in", center_in, "Anchor file")->required()->check(CLI::ExistingFile);
  center_cmd->add_option("--out", center_out, "Output anchor file")->required();
  auto* stats_cmd = anchors_cmd->add_subcommand("stats", "Per-class counts and intra-class cosine");
  stats_cmd->add_option("--in", stats_in, "Anchor file")->required()->check(CLI::ExistingFile);

  TrainOverrides tr;
  auto* train_cmd = app.add_subcommand("train", "Train one or more seeds");
  train_cmd->add_option("--config", tr.config, "JSON run config")->check(CLI::ExistingFile);
  train_cmd->add_option("--manifest", tr.manifest, "Dataset manifest");
  train_cmd->add_option("--anchors", tr.anchors, "Anchor file (default: anchors.vea next to the manifest)");
  train_cmd->add_option("--ablation", tr.ablation, "Ablation mode");
  train_cmd->add_option("--seeds", tr.seeds, "Seeds: 3, 1..10 or 1,4,7");
  train_cmd->add_option("--jobs", tr.jobs, "Parallel seed workers")->capture_default_str();
  train_cmd->add_option("--out", tr.out, "Output directory")->capture_default_str();
  train_cmd->add_option("--epochs", tr.epochs, "Epochs");
  train_cmd->add_option("--batch-size", tr.batch_size, "Conversations per step");
  train_cmd->add_option("--patience", tr.patience, "Early-stopping patience");
  train_cmd->add_option("--lr", tr.lr, "Learning rate");
  train_cmd->add_option("--weight-decay", tr.weight_decay, "Decoupled weight decay");
  train_cmd->add_option("--q", tr.q, "Probability of a random instance anchor");
  train_cmd->add_option("--images-per-class", tr.images_per_class, "Anchor instances kept per class (0 = all)");
  train_cmd->add_option("--hidden", tr.hidden, "Hidden width");
  train_cmd->add_option("--heads", tr.heads, "Attention heads");
  train_cmd->add_option("--layers", tr.layers, "Transformer layers");
  train_cmd->add_option("--dropout", tr.dropout, "Encoder and classifier dropout");
  train_cmd->add_option("--modalities", tr.modalities, "Active modalities, e.g. TAV or TA");
  train_cmd->add_option("--branch", tr.branch, "dual or single");
  train_cmd->add_option("--split-seed", tr.split_seed, "Seed of the conversation split");

  std::string ck, run_file, which = "test";
  std::optional<std::string> eval_manifest;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", ck, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--run", run_file, "run.json written next to the checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--manifest", eval_manifest, "Dataset manifest (default: the run's)");
  eval_cmd->add_option("--split", which, "train, val, test or all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}))
      ->capture_default_str();

  std::uint64_t gc_seed = 0;
  std::size_t gc_count = 1;
  bool gc_verbose = false;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every op and the full objective");
  gc_cmd->add_option("--seed", gc_seed, "First seed")->capture_default_str();
  gc_cmd->add_option("--count", gc_count, "Number of consecutive seeds")->capture_default_str();
  gc_cmd->add_flag("--verbose", gc_verbose, "Print passing checks too");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth_cmd) return run_synth(synth);
    if (*center_cmd) return run_anchor_center(center_in, center_out);
    if (*stats_cmd) return run_anchor_stats(stats_in);
    if (*train_cmd) {
      if (tr.config.empty() && !tr.manifest) throw ConfigError("train needs --config or --manifest");
      return run_train(tr);
    }
    if (*eval_cmd) return run_eval(ck, run_file, eval_manifest, which);
    if (*gc_cmd) return run_gradcheck(gc_seed, gc_count, gc_verbose);
  } catch (const DataError& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
