#pragma once

// Certificates from a parameter box: the set of classes any parameter vector
// in the box can predict, logit and loss bounds, and backdoor verdicts.

#include "agt/bound_prop.hpp"

#include <cstdint>
#include <vector>

namespace agt {

struct Certificate {
  int label = -1;               // true class, -1 for regression
  int nominal_prediction = -1;  // argmax of the nominal logits, -1 for regression
  std::vector<int> reachable;   // S', ascending
  IntervalVector logits;
  Interval loss;                // encloses the nominal loss
  bool certified = false;

  /// Bit i set iff class i is reachable (classes < 64).
  std::uint64_t reachable_mask() const;
};

/// Classes not strictly dominated: i is dropped iff some j != i has U_i < L_j.
std::vector<int> reachable_classes(const IntervalVector& logits);

/// Certified iff the only reachable class is the true label. For regression
/// targets only the logit and loss bounds are filled in.
Certificate certified_prediction(const ParamBox& box, const Eigen::VectorXd& x, const Target& y,
                                 BoundMode mode = BoundMode::Tightest);

/// Certified iff every class reachable over the box and the l-infinity ball of
/// `radius` around x lies in `safe` (empty `safe` means {true label}).
Certificate backdoor_certificate(const ParamBox& box, const Eigen::VectorXd& x, const Target& y, double radius,
                                 const std::vector<int>& safe = {}, BoundMode mode = BoundMode::Tightest);

/// One certificate per row, computed in parallel.
std::vector<Certificate> certify_dataset(const ParamBox& box, const Dataset& data, double backdoor_radius = 0.0,
                                         const std::vector<int>& safe = {}, BoundMode mode = BoundMode::Tightest);

/// Fraction of certified points. Throws on an empty set or a regression task.
double certified_accuracy(const ParamBox& box, const Dataset& data, BoundMode mode = BoundMode::Tightest);

/// Mean lower and upper loss bounds over the set.
Interval loss_bound_testset(const ParamBox& box, const Dataset& data, BoundMode mode = BoundMode::Tightest);

}  // namespace agt
