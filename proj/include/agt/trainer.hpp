#pragma once

// Abstract gradient training: nominal SGD run alongside a parameter box that
// contains every parameter vector SGD can reach when an adversary poisons the
// training data within its budget.
//
// Budgets are per batch: every batch may contain up to n feature-poisoned and
// m label-poisoned samples, whatever happened in earlier batches.

#include "agt/bound_prop.hpp"
#include "agt/network.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

namespace agt {

/// Perturbs up to n samples per batch by eps in l-infinity (features) and up
/// to m labels: by nu in l-infinity (regression) or by flipping (classification).
struct BoundedAdversary {
  int n = 0;
  double epsilon = 0.0;
  int m = 0;
  double nu = 0.0;
  bool label_flip = false;  // q = 0 with nu = 1
  // Feature- and label-poisoned samples may differ. The default bound counts
  // max(n, m) perturbed samples, which assumes they coincide; this counts n + m.
  bool disjoint_sets = false;

  void validate() const;
};

/// Replaces up to n samples per batch with arbitrary points. Requires clipping.
struct UnboundedAdversary {
  int n = 0;

  void validate() const;
};

using Adversary = std::variant<BoundedAdversary, UnboundedAdversary>;

class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

/// Flat per-sample gradient bounds, clean (delta) and poisoned (delta tilde).
struct GradBounds {
  Eigen::VectorXd clean_lo, clean_hi;
  Eigen::VectorXd poisoned_lo, poisoned_hi;
};

Eigen::VectorXd semax(std::span<const Eigen::VectorXd> vectors, int count);
Eigen::VectorXd semin(std::span<const Eigen::VectorXd> vectors, int count);

struct DescentBounds {
  Eigen::VectorXd lo, hi;
};

/// Bounded adversary, batch of size `batch_size`.
///   lo = (SEMin_a {poisoned_lo - clean_lo} + sum clean_lo) / b
///   hi = (SEMax_a {poisoned_hi - clean_hi} + sum clean_hi) / b,  a = max(n, m)
/// (a = n + m with disjoint_sets), capped at b.
/// Samples whose poisoned bounds equal their clean bounds contribute zero difference.
DescentBounds descent_bounds_bounded(std::span<const GradBounds> samples, const BoundedAdversary& adv,
                                     int batch_size);

/// Unbounded adversary with clipping level kappa:
///   lo = (SEMin_{b-n} {clean_lo} - n kappa) / b,  hi = (SEMax_{b-n} {clean_hi} + n kappa) / b
/// Evaluated as (sum clean_lo + SEMin_n {-kappa - clean_lo}) / b, which is the
/// same quantity summed in the order SGD uses.
/// `poisonable` (optional) restricts which samples may be replaced.
DescentBounds descent_bounds_unbounded(std::span<const GradBounds> samples, const UnboundedAdversary& adv,
                                       int batch_size, std::optional<double> kappa,
                                       std::span<const std::uint8_t> poisonable = {});

struct StepRecord {
  long step = 0;
  double lr = 0.0;
  double nominal_loss = 0.0;
  double mean_width = 0.0;
  double max_width = 0.0;
};

struct AgtConfig {
  TrainConfig train;
  BoundMode bound_mode = BoundMode::Tightest;
  bool record_trajectory = false;
};

struct AgtResult {
  DenseReluNetwork nominal;
  ParamBox box;
  std::vector<StepRecord> history;
  // When recorded: box bounds after every step, index 0 is the initial box.
  std::vector<Eigen::VectorXd> trajectory_lo, trajectory_hi;
};

/// Runs abstract gradient training. Throws DivergenceError on non-finite values
/// and std::logic_error if the nominal parameters ever leave the box.
AgtResult agt_train(const DenseReluNetwork& init, const Dataset& data, const AgtConfig& cfg, const Adversary& adv);

/// Per-sample bounds for one batch under the given adversary (exposed for tests).
std::vector<GradBounds> batch_grad_bounds(const ParamBox& box, const Dataset& batch, const Adversary& adv,
                                          std::optional<double> clip_level, BoundMode mode,
                                          std::vector<Eigen::VectorXd>* nominal_grads = nullptr);

}  // namespace agt
