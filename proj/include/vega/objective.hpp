#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "json.hpp"

#include "vega/model.hpp"

namespace vega {

enum class Term : std::size_t {
  ClsFuse = 0,  // CE of the fused prediction
  ClsUni,       // CE of each unimodal prediction, summed over modalities
  Dist,         // KL(teacher || unimodal prediction), summed over modalities
  AncFuse,      // CE of the fused anchor prediction
  AncUni,       // CE of each unimodal anchor prediction
  AncDist,      // KL(teacher || unimodal anchor prediction)
};

inline constexpr std::size_t kNumTerms = 6;
inline constexpr std::array<Term, kNumTerms> kAllTerms{Term::ClsFuse, Term::ClsUni, Term::Dist,
                                                       Term::AncFuse, Term::AncUni, Term::AncDist};

const char* term_name(Term term);
inline bool is_vega_term(Term term) { return static_cast<std::size_t>(term) >= 3; }

struct LossWeights {
  double cls_fuse = 0.5;
  double cls_uni = 0.5;
  double dist = 0.9;
  double anc_fuse = 0.6;
  double anc_uni = 0.6;
  double anc_dist = 0.6;

  double get(Term term) const;
  void set(Term term, double value);
  void validate() const;
};

/// Distribution used as the (detached) teacher of a distillation term.
enum class Teacher { Fused, FusedAnchor };

/// Which terms enter the objective and who teaches the two distillation terms.
struct ObjectivePlan {
  std::array<bool, kNumTerms> active{true, true, true, true, true, true};
  Teacher dist_teacher = Teacher::Fused;
  Teacher anc_dist_teacher = Teacher::FusedAnchor;

  bool has(Term term) const { return active[static_cast<std::size_t>(term)]; }
  /// True when any term or teacher needs the anchor predictions.
  bool needs_anchors() const;
};

/// Names accepted by --ablation.
const std::vector<std::string>& ablation_modes();

/// Resolves an ablation mode: returns the objective plan and adjusts the model
/// configuration for structural modes. Unknown names throw.
ObjectivePlan apply_ablation(const std::string& mode, ModelConfig& config);

/// Unweighted per-term means plus the weighted branch totals.
template <typename T>
struct Objective {
  std::array<Tensor<T>, kNumTerms> terms;  // undefined for inactive terms
  Tensor<T> supervision;
  Tensor<T> vega;
  Tensor<T> total;
};

/// Fixed teacher distributions. Teachers are stop-gradient, so a
/// finite-difference check must hold them at their unperturbed values.
template <typename T>
struct FrozenTeachers {
  Tensor<T> dist;
  Tensor<T> anc_dist;
};

template <typename T>
Objective<T> compute_objective(Tape<T>& tape, const ModelOutputs<T>& outputs,
                               const LossWeights& weights, const ObjectivePlan& plan,
                               const FrozenTeachers<T>& frozen = {});

/// The teacher distributions `plan` would use for these outputs (detached).
template <typename T>
FrozenTeachers<T> teachers_of(const ModelOutputs<T>& outputs, const ObjectivePlan& plan);

/// Mean over rows of -log(probs[r, label_r]).
template <typename T>
Tensor<T> ce_loss(Tape<T>& tape, const Tensor<T>& probs, const std::vector<std::size_t>& labels);

/// Mean over rows of KL(teacher || student); the teacher is detached.
template <typename T>
Tensor<T> distill_loss(Tape<T>& tape, const Tensor<T>& teacher, const Tensor<T>& student);

struct LossReport {
  std::array<double, kNumTerms> terms{};
  std::array<bool, kNumTerms> active{};
  double supervision = 0.0;
  double vega = 0.0;
  double total = 0.0;

  nlohmann::json to_json() const;
};

template <typename T>
LossReport make_report(const Objective<T>& objective);

}  // namespace vega
