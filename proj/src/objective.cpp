#include "vega/objective.hpp"

#include <stdexcept>

namespace vega {

const char* term_name(Term term) {
  switch (term) {
    case Term::ClsFuse: return "cls_fuse";
    case Term::ClsUni: return "cls_uni";
    case Term::Dist: return "dist";
    case Term::AncFuse: return "anc_fuse";
    case Term::AncUni: return "anc_uni";
    case Term::AncDist: return "anc_dist";
  }
  return "?";
}

double LossWeights::get(Term term) const {
  switch (term) {
    case Term::ClsFuse: return cls_fuse;
    case Term::ClsUni: return cls_uni;
    case Term::Dist: return dist;
    case Term::AncFuse: return anc_fuse;
    case Term::AncUni: return anc_uni;
    case Term::AncDist: return anc_dist;
  }
  return 0.0;
}

void LossWeights::set(Term term, double value) {
  switch (term) {
    case Term::ClsFuse: cls_fuse = value; break;
    case Term::ClsUni: cls_uni = value; break;
    case Term::Dist: dist = value; break;
    case Term::AncFuse: anc_fuse = value; break;
    case Term::AncUni: anc_uni = value; break;
    case Term::AncDist: anc_dist = value; break;
  }
}

void LossWeights::validate() const {
  for (auto t : kAllTerms) {
    if (!(get(t) >= 0.0)) {
      throw std::invalid_argument(std::string("loss weight ") + term_name(t) + " must be >= 0");
    }
  }
}

bool ObjectivePlan::needs_anchors() const {
  if (has(Term::AncFuse) || has(Term::AncUni) || has(Term::AncDist)) return true;
  return has(Term::Dist) && dist_teacher == Teacher::FusedAnchor;
}

const std::vector<std::string>& ablation_modes() {
  static const std::vector<std::string> modes{
      "full",          "no-anc-fuse",      "no-anc-uni",       "no-anc-dist", "cls-only",
      "anchor-only",   "teacher-swap-anc", "teacher-swap-cls", "single-branch",
      "no-positional", "no-speaker",       "no-intra",         "no-inter"};
  return modes;
}

ObjectivePlan apply_ablation(const std::string& mode, ModelConfig& config) {
  ObjectivePlan plan;
  auto drop = [&](std::initializer_list<Term> terms) {
    for (auto t : terms) plan.active[static_cast<std::size_t>(t)] = false;
  };
  if (mode == "full") {
  } else if (mode == "no-anc-fuse") {
    drop({Term::AncFuse});
  } else if (mode == "no-anc-uni") {
    drop({Term::AncUni});
  } else if (mode == "no-anc-dist") {
    drop({Term::AncDist});
  } else if (mode == "cls-only") {
    drop({Term::AncFuse, Term::AncUni, Term::AncDist});
  } else if (mode == "anchor-only") {
    drop({Term::ClsFuse, Term::ClsUni, Term::Dist});
  } else if (mode == "teacher-swap-anc") {
    plan.anc_dist_teacher = Teacher::Fused;
  } else if (mode == "teacher-swap-cls") {
    plan.dist_teacher = Teacher::FusedAnchor;
  } else if (mode == "single-branch") {
    config.branch = BranchMode::Single;
  } else if (mode == "no-positional") {
    config.use_positional = false;
  } else if (mode == "no-speaker") {
    config.use_speaker = false;
  } else if (mode == "no-intra") {
    config.use_intra = false;
  } else if (mode == "no-inter") {
    config.use_inter = false;
  } else {
    std::string known;
    for (const auto& m : ablation_modes()) known += (known.empty() ? "" : ", ") + m;
    throw std::invalid_argument("unknown ablation mode '" + mode + "' (known: " + known + ")");
  }
  return plan;
}

template <typename T>
Tensor<T> ce_loss(Tape<T>& tape, const Tensor<T>& probs, const std::vector<std::size_t>& labels) {
  return mean(tape, nll(tape, probs, labels));
}

template <typename T>
Tensor<T> distill_loss(Tape<T>& tape, const Tensor<T>& teacher, const Tensor<T>& student) {
  return mean(tape, kl_div(tape, detach(teacher), student));
}

namespace {

template <typename T>
Tensor<T> sum_terms(Tape<T>& tape, const std::vector<Tensor<T>>& parts) {
  Tensor<T> acc = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) acc = add(tape, acc, parts[i]);
  return acc;
}

template <typename T>
const Tensor<T>& require(const Tensor<T>& t, const char* what) {
  if (!t.defined()) throw ArgumentError(std::string("objective needs ") + what + ", which was not computed");
  return t;
}

}  // namespace

template <typename T>
Objective<T> compute_objective(Tape<T>& tape, const ModelOutputs<T>& out,
                               const LossWeights& weights, const ObjectivePlan& plan,
                               const FrozenTeachers<T>& frozen) {
  std::vector<Tensor<T>> uni, anc_uni;
  for (auto m : kAllModalities) {
    if (out.probs[index_of(m)].defined()) uni.push_back(out.probs[index_of(m)]);
    if (out.anchor_probs[index_of(m)].defined()) anc_uni.push_back(out.anchor_probs[index_of(m)]);
  }
  auto teacher = [&](Teacher t) -> const Tensor<T>& {
    return t == Teacher::Fused ? require(out.fused_probs, "the fused prediction")
                               : require(out.fused_anchor_probs, "the fused anchor prediction");
  };

  Objective<T> obj;
  auto& terms = obj.terms;
  const auto& y = out.labels;
  if (plan.has(Term::ClsFuse)) terms[0] = ce_loss(tape, out.fused_probs, y);
  if (plan.has(Term::ClsUni)) {
    std::vector<Tensor<T>> parts;
    for (const auto& p : uni) parts.push_back(ce_loss(tape, p, y));
    terms[1] = sum_terms(tape, parts);
  }
  if (plan.has(Term::Dist)) {
    const auto& t = frozen.dist.defined() ? frozen.dist : teacher(plan.dist_teacher);
    std::vector<Tensor<T>> parts;
    for (const auto& p : uni) parts.push_back(distill_loss(tape, t, p));
    terms[2] = sum_terms(tape, parts);
  }
  if (plan.has(Term::AncFuse)) {
    terms[3] = ce_loss(tape, require(out.fused_anchor_probs, "the fused anchor prediction"), y);
  }
  if (plan.has(Term::AncUni) || plan.has(Term::AncDist)) {
    if (anc_uni.empty()) throw ArgumentError("objective needs unimodal anchor predictions");
  }
  if (plan.has(Term::AncUni)) {
    std::vector<Tensor<T>> parts;
    for (const auto& p : anc_uni) parts.push_back(ce_loss(tape, p, y));
    terms[4] = sum_terms(tape, parts);
  }
  if (plan.has(Term::AncDist)) {
    const auto& t = frozen.anc_dist.defined() ? frozen.anc_dist : teacher(plan.anc_dist_teacher);
    std::vector<Tensor<T>> parts;
    for (const auto& p : anc_uni) parts.push_back(distill_loss(tape, t, p));
    terms[5] = sum_terms(tape, parts);
  }

  std::vector<Tensor<T>> sup, vega;
  for (auto t : kAllTerms) {
    const auto& term = terms[static_cast<std::size_t>(t)];
    if (!term.defined()) continue;
    auto weighted = scale(tape, term, static_cast<T>(weights.get(t)));
    (is_vega_term(t) ? vega : sup).push_back(weighted);
  }
  obj.supervision = sup.empty() ? Tensor<T>::scalar(T(0)) : sum_terms(tape, sup);
  if (vega.empty()) {
    obj.vega = Tensor<T>::scalar(T(0));
    obj.total = obj.supervision;
  } else {
    obj.vega = sum_terms(tape, vega);
    obj.total = add(tape, obj.supervision, obj.vega);
  }
  return obj;
}

template <typename T>
FrozenTeachers<T> teachers_of(const ModelOutputs<T>& out, const ObjectivePlan& plan) {
  auto pick = [&](Teacher t) { return t == Teacher::Fused ? out.fused_probs : out.fused_anchor_probs; };
  FrozenTeachers<T> f;
  if (plan.has(Term::Dist)) f.dist = detach(pick(plan.dist_teacher));
  if (plan.has(Term::AncDist)) f.anc_dist = detach(pick(plan.anc_dist_teacher));
  return f;
}

nlohmann::json LossReport::to_json() const {
  nlohmann::json j;
  for (auto t : kAllTerms) {
    const auto i = static_cast<std::size_t>(t);
    if (active[i]) j[term_name(t)] = terms[i];
  }
  j["sup"] = supervision;
  j["vega"] = vega;
  j["total"] = total;
  return j;
}

template <typename T>
LossReport make_report(const Objective<T>& objective) {
  LossReport r;
  for (std::size_t i = 0; i < kNumTerms; ++i) {
    r.active[i] = objective.terms[i].defined();
    if (r.active[i]) r.terms[i] = static_cast<double>(objective.terms[i].item());
  }
  r.supervision = static_cast<double>(objective.supervision.item());
  r.vega = static_cast<double>(objective.vega.item());
  r.total = static_cast<double>(objective.total.item());
  return r;
}

#define VEGA_INSTANTIATE_OBJECTIVE(T)                                                               \
  template Objective<T> compute_objective<T>(Tape<T>&, const ModelOutputs<T>&, const LossWeights&,  \
                                             const ObjectivePlan&, const FrozenTeachers<T>&);       \
  template FrozenTeachers<T> teachers_of<T>(const ModelOutputs<T>&, const ObjectivePlan&);          \
  template Tensor<T> ce_loss<T>(Tape<T>&, const Tensor<T>&, const std::vector<std::size_t>&);       \
  template Tensor<T> distill_loss<T>(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                 \
  template LossReport make_report<T>(const Objective<T>&);

VEGA_INSTANTIATE_OBJECTIVE(float)
VEGA_INSTANTIATE_OBJECTIVE(double)

}  // namespace vega
