#include "vega/config.hpp"

#include <fstream>
#include <set>

namespace vega {

using json = nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::string& section, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError("config: '" + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      throw ConfigError("config: unknown key '" + (section.empty() ? key : section + "." + key) +
                        "' (allowed: " + list + ")");
    }
  }
}

template <typename V>
void read(const json& j, const std::string& section, const char* key, V& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception& e) {
    throw ConfigError("config: bad value for '" + section + "." + key + "': " + e.what());
  }
}

}  // namespace

std::array<bool, kNumModalities> parse_modalities(const std::string& text) {
  std::array<bool, kNumModalities> flags{false, false, false};
  for (char c : text) {
    if (c != 'T' && c != 'A' && c != 'V') {
      throw ConfigError("modalities: unknown tag '" + std::string(1, c) + "' (use T, A, V)");
    }
    flags[index_of(modality_from_tag(c))] = true;
  }
  if (text.empty()) throw ConfigError("modalities: at least one of T, A, V is required");
  return flags;
}

std::string format_modalities(const std::array<bool, kNumModalities>& flags) {
  std::string s;
  for (auto m : kAllModalities) {
    if (flags[index_of(m)]) s += modality_tag(m);
  }
  return s;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  auto parse_one = [&](const std::string& s) -> std::uint64_t {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw ConfigError("seeds: cannot parse '" + s + "'");
    return v;
  };
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    const auto dots = item.find("..");
    if (dots != std::string::npos) {
      const auto lo = parse_one(item.substr(0, dots));
      const auto hi = parse_one(item.substr(dots + 2));
      if (hi < lo) throw ConfigError("seeds: empty range '" + item + "'");
      for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    } else {
      seeds.push_back(parse_one(item));
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return seeds;
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  reject_unknown(j, "", {"data", "model", "loss", "sampling", "optim", "train", "ablation", "seeds"});
  if (j.contains("data")) {
    const auto& d = j["data"];
    reject_unknown(d, "data", {"manifest", "anchors", "split", "split_seed"});
    read(d, "data", "manifest", c.data.manifest);
    read(d, "data", "anchors", c.data.anchors);
    read(d, "data", "split_seed", c.data.split_seed);
    if (d.contains("split")) {
      std::vector<double> r;
      read(d, "data", "split", r);
      if (r.size() != 3) throw ConfigError("config: data.split needs three ratios [train, val, test]");
      c.data.split = {r[0], r[1], r[2]};
    }
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    reject_unknown(m, "model",
                   {"hidden", "half_window", "heads", "layers", "ffn_mult", "dropout", "max_positions",
                    "modalities", "use_positional", "use_speaker", "use_intra", "use_inter",
                    "projection_hidden", "projection_dropout", "shared_projection", "shared_gate",
                    "vega_head", "branch"});
    auto& mc = c.model;
    read(m, "model", "hidden", mc.hidden);
    read(m, "model", "half_window", mc.half_window);
    read(m, "model", "heads", mc.heads);
    read(m, "model", "layers", mc.layers);
    read(m, "model", "ffn_mult", mc.ffn_mult);
    read(m, "model", "dropout", mc.dropout);
    read(m, "model", "max_positions", mc.max_positions);
    read(m, "model", "use_positional", mc.use_positional);
    read(m, "model", "use_speaker", mc.use_speaker);
    read(m, "model", "use_intra", mc.use_intra);
    read(m, "model", "use_inter", mc.use_inter);
    read(m, "model", "projection_hidden", mc.projection_hidden);
    read(m, "model", "projection_dropout", mc.projection_dropout);
    read(m, "model", "shared_projection", mc.shared_projection);
    read(m, "model", "shared_gate", mc.shared_gate);
    read(m, "model", "vega_head", mc.vega_head);
    if (m.contains("modalities")) {
      std::string s;
      read(m, "model", "modalities", s);
      mc.modalities = parse_modalities(s);
    }
    if (m.contains("branch")) {
      std::string s;
      read(m, "model", "branch", s);
      try {
        mc.branch = branch_mode_from_string(s);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: model.branch: ") + e.what());
      }
    }
  }
  if (j.contains("loss")) {
    const auto& l = j["loss"];
    reject_unknown(l, "loss", {"cls_fuse", "cls_uni", "dist", "anc_fuse", "anc_uni", "anc_dist"});
    for (auto t : kAllTerms) {
      double v = c.loss.get(t);
      read(l, "loss", term_name(t), v);
      c.loss.set(t, v);
    }
  }
  if (j.contains("sampling")) {
    const auto& s = j["sampling"];
    reject_unknown(s, "sampling", {"q", "images_per_class"});
    read(s, "sampling", "q", c.sampling.q);
    read(s, "sampling", "images_per_class", c.images_per_class);
  }
  if (j.contains("optim")) {
    const auto& o = j["optim"];
    reject_unknown(o, "optim", {"lr", "weight_decay", "beta1", "beta2", "eps"});
    read(o, "optim", "lr", c.optim.lr);
    read(o, "optim", "weight_decay", c.optim.weight_decay);
    read(o, "optim", "beta1", c.optim.beta1);
    read(o, "optim", "beta2", c.optim.beta2);
    read(o, "optim", "eps", c.optim.eps);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    reject_unknown(t, "train", {"epochs", "batch_size", "patience", "log_steps"});
    read(t, "train", "epochs", c.train.epochs);
    read(t, "train", "batch_size", c.train.batch_size);
    read(t, "train", "patience", c.train.patience);
    read(t, "train", "log_steps", c.train.log_steps);
  }
  read(j, "", "ablation", c.ablation);
  read(j, "", "seeds", c.seeds);
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

json RunConfig::to_json() const {
  const auto& m = model;
  json loss_j;
  for (auto t : kAllTerms) loss_j[term_name(t)] = loss.get(t);
  return {
      {"data",
       {{"manifest", data.manifest},
        {"anchors", data.anchors},
        {"split", {data.split.train, data.split.val, data.split.test}},
        {"split_seed", data.split_seed}}},
      {"model",
       {{"hidden", m.hidden},
        {"half_window", m.half_window},
        {"heads", m.heads},
        {"layers", m.layers},
        {"ffn_mult", m.ffn_mult},
        {"dropout", m.dropout},
        {"max_positions", m.max_positions},
        {"modalities", format_modalities(m.modalities)},
        {"use_positional", m.use_positional},
        {"use_speaker", m.use_speaker},
        {"use_intra", m.use_intra},
        {"use_inter", m.use_inter},
        {"projection_hidden", m.projection_hidden},
        {"projection_dropout", m.projection_dropout},
        {"shared_projection", m.shared_projection},
        {"shared_gate", m.shared_gate},
        {"vega_head", m.vega_head},
        {"branch", to_string(m.branch)}}},
      {"loss", loss_j},
      {"sampling", {{"q", sampling.q}, {"images_per_class", images_per_class}}},
      {"optim",
       {{"lr", optim.lr},
        {"weight_decay", optim.weight_decay},
        {"beta1", optim.beta1},
        {"beta2", optim.beta2},
        {"eps", optim.eps}}},
      {"train",
       {{"epochs", train.epochs},
        {"batch_size", train.batch_size},
        {"patience", train.patience},
        {"log_steps", train.log_steps}}},
      {"ablation", ablation},
      {"seeds", seeds},
  };
}

void RunConfig::validate() const {
  try {
    ModelConfig probe = model;
    apply_ablation(ablation, probe);
    probe.num_classes = std::max<std::size_t>(probe.num_classes, 2);
    probe.validate();
    loss.validate();
    sampling.validate();
    optim.validate();
    train.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  const double sum = data.split.train + data.split.val + data.split.test;
  if (!(data.split.train > 0 && data.split.val > 0 && data.split.test > 0) || std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("config: data.split ratios must be positive and sum to 1");
  }
  if (seeds.empty()) throw ConfigError("config: seeds must list at least one seed");
}

}  // namespace vega
