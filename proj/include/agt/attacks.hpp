#pragma once

// Heuristic poisoning attacks and the soundness harness that trains on
// attacked data and checks the parameters stay inside the AGT box.

#include "agt/certify.hpp"
#include "agt/trainer.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace agt {

enum class AttackKind { ParamTargetPgd, FeatureCollision, LabelFlip };

std::string to_string(AttackKind k);
AttackKind attack_kind_from_string(const std::string& s);

struct AttackSpec {
  AttackKind kind = AttackKind::LabelFlip;
  int n = 0;               // feature-poisoned samples per batch
  double epsilon = 0.0;    // l-infinity feature radius
  int m = 0;               // label-poisoned samples per batch
  int pgd_steps = 20;
  std::optional<double> step_size;           // defaults to epsilon / 10
  std::optional<Eigen::VectorXd> direction;  // PGD parameter functional; random unit-scale if unset
  std::optional<Eigen::VectorXd> target;     // collision point; a random batch point if unset
  int class_from = -1;  // -1: any class
  int class_to = -1;    // -1: a uniformly random other class
  std::uint64_t seed = 0;

  void validate() const;
};

/// Perturbs up to n poisonable samples by v, ||v||_inf <= eps, with sign-PGD
/// maximising direction . grad_theta L(x + v, y). The input gradient is taken
/// by central finite differences.
Dataset param_target_pgd_poison(const Dataset& batch, const DenseReluNetwork& net, const Eigen::VectorXd& direction,
                                const AttackSpec& spec, std::uint64_t seed);

/// Replaces the features of n poisonable samples with `target` and draws their
/// labels uniformly (classes, or [0, 1] per output for regression).
Dataset feature_collision_attack(const Dataset& batch, const Eigen::VectorXd& target, int n, std::uint64_t seed);

struct LabelFlipResult {
  Dataset batch;
  std::vector<std::size_t> flipped;  // ascending row indices
};

/// Flips min(m, eligible) labels. Eligible rows are poisonable, of class
/// `from` (any if -1) and not already `to`.
LabelFlipResult label_flip_attack(const Dataset& batch, int m, int from, int to, std::uint64_t seed);
/// Sets the label of every listed row to `to`.
Dataset flip_labels(const Dataset& batch, const std::vector<std::size_t>& rows, int to);

/// Clamps a poisoned batch into the adversary's feasible set relative to the
/// clean batch: feature moves to the eps-ball, label moves to nu (or reverted
/// when flipping is not allowed), and changes beyond the n / m row budgets
/// reverted. For an unbounded adversary rows beyond the first n changed ones are reverted.
Dataset project_to_budget(const Dataset& clean, const Dataset& poisoned, const Adversary& adv);
/// True iff `poisoned` is reachable from `clean` under the adversary.
bool is_feasible(const Dataset& clean, const Dataset& poisoned, const Adversary& adv);

struct AttackTrialResult {
  AttackKind kind{};
  int trial = 0;
  int violations = 0;              // parameter-steps outside the box
  double min_margin = 0.0;         // min over steps and params of distance to the nearest face (negative = outside)
  bool loss_contained = true;      // final test loss inside the certified loss bounds, when probed
};

struct SoundnessReport {
  int trials = 0;
  int violations = 0;                  // total over trials
  std::vector<double> step_min_margin; // per step, min over trials and params
  std::vector<AttackTrialResult> results;
  int loss_violations = 0;
  double box_mean_width = 0.0;
};

struct SoundnessOptions {
  int trials = 100;
  double tolerance = 1e-9;            // containment slack, relative to 1 + |theta|
  const Dataset* loss_probe = nullptr;
};

/// Trains the AGT box once, then runs plain SGD on attacked data for every
/// spec and trial and checks containment after each step.
SoundnessReport soundness_harness(const DenseReluNetwork& init, const Dataset& data, const AgtConfig& cfg,
                                  const Adversary& adv, const std::vector<AttackSpec>& specs,
                                  const SoundnessOptions& opts);

/// Checks an attack's budget fits inside the adversary's; throws InvalidInput otherwise.
void check_attack_budget(const AttackSpec& spec, const Adversary& adv);

}  // namespace agt
