#pragma once

// Sound enclosures of a dense ReLU network's forward pass, loss gradient and
// parameter gradients when the parameters range over a box, the input over an
// l-infinity ball and the label over a label ball.
//
// Forward bounds come from interval bound propagation (IBP), from linear bound
// propagation with interval-valued weights (CROWN), or from the elementwise
// tightest of the two. The backward pass is always interval arithmetic.

#include "agt/interval.hpp"
#include "agt/network.hpp"

#include <Eigen/Dense>

#include <vector>

namespace agt {

/// Per-layer interval weights and biases plus the nominal parameters.
class ParamBox {
 public:
  ParamBox() = default;
  /// Degenerate box around the network's parameters.
  explicit ParamBox(const DenseReluNetwork& nominal);
  ParamBox(DenseReluNetwork nominal, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

  const DenseReluNetwork& nominal() const { return nominal_; }
  int num_layers() const { return nominal_.num_layers(); }
  const IntervalMatrix& weight(int k) const { return weights_[k]; }
  const IntervalVector& bias(int k) const { return biases_[k]; }

  Eigen::VectorXd lo() const;
  Eigen::VectorXd hi() const;
  Eigen::VectorXd width() const { return hi() - lo(); }
  bool contains(const Eigen::VectorXd& theta, double tol = 0.0) const;

  /// Box with lo/hi replaced; the nominal network is kept.
  ParamBox with_bounds(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) const;

 private:
  DenseReluNetwork nominal_;
  std::vector<IntervalMatrix> weights_;
  std::vector<IntervalVector> biases_;
};

/// h_L(z) = alpha_l (z + beta_l) <= ReLU(z) <= alpha_u (z + beta_u) = h_U(z) on [l, u].
struct ActivationRelaxation {
  double alpha_l = 0.0, beta_l = 0.0;
  double alpha_u = 0.0, beta_u = 0.0;

  /// Upper: chord through (l, 0) and (u, u). Lower: slope 1 if u >= |l| else 0.
  static ActivationRelaxation relu(double l, double u);
};

/// Bounds for every layer of one forward pass.
struct LayerBounds {
  IntervalVector input;                // z(0)
  std::vector<IntervalVector> pre;     // pre[k-1] encloses zhat(k), k = 1..K
  std::vector<IntervalVector> post;    // post[k-1] encloses z(k) = ReLU(zhat(k)), k = 1..K-1

  const IntervalVector& logits() const { return pre.back(); }
  /// Enclosure of z(k) for k = 0..K-1.
  const IntervalVector& activation(int k) const { return k == 0 ? input : post[k - 1]; }
};

/// Linear bound coefficients for layer t's pre-activations, rows j = 1..n_t.
///
/// For the upper bound, zhat(t)_j <= Lambda(0)_j x + sum_k Lambda(k)_j (b(k) + Delta(k)_{:,j})
///                                   + sum_k Concrete_U(k)_j ReLU([l(k), u(k)]),
/// where Lambda(k) (k >= 1) multiplies zhat(k) and Lambda(0) multiplies the input.
/// When the sign of an entry of Lambda(k+1) W(k+1) is ambiguous, that neuron's
/// linear relaxation is not propagated: its Lambda entry is 0 and the interval
/// coefficient is kept in Concrete_U so the neuron contributes through its
/// concrete post-activation interval. The lower bound mirrors this with Omega,
/// Theta and Concrete_L.
struct CrownCoefficients {
  std::vector<IntervalMatrix> upper;          // Lambda(0..t)
  std::vector<IntervalMatrix> lower;          // Omega(0..t)
  std::vector<Eigen::MatrixXd> upper_offset;  // Delta(k), n_k x n_t, k = 1..t (index k)
  std::vector<Eigen::MatrixXd> lower_offset;  // Theta(k)
  std::vector<IntervalMatrix> upper_concrete; // n_t x n_k, k = 1..t-1 (index k)
  std::vector<IntervalMatrix> lower_concrete;
};

enum class BoundMode { Ibp, Crown, Tightest };

std::string to_string(BoundMode m);
BoundMode bound_mode_from_string(const std::string& s);

LayerBounds ibp_forward(const ParamBox& box, const IntervalVector& x);

/// Back-substitutes from layer `target` (1-based) to the input using the
/// pre-activation bounds of layers 1..target-1 held in `earlier`.
CrownCoefficients crown_coefficients(const ParamBox& box, const LayerBounds& earlier, int target);
/// Closed-form global bounds of layer `target` from its coefficients.
IntervalVector crown_bounds(const ParamBox& box, const LayerBounds& earlier, int target,
                            const CrownCoefficients& coeffs);

/// CROWN for every layer; layer 1 is the interval affine image, and each later
/// layer uses CROWN bounds of the layers before it.
LayerBounds crown_forward(const ParamBox& box, const IntervalVector& x);
/// Elementwise intersection of IBP and CROWN at every layer, with each layer's
/// relaxations built from the tightest earlier bounds.
LayerBounds tightest_forward(const ParamBox& box, const IntervalVector& x);
LayerBounds forward_bounds(const ParamBox& box, const IntervalVector& x, BoundMode mode);

/// Label perturbation: an l-infinity ball of radius nu (MSE) or arbitrary label flipping (cross entropy).
struct LabelBall {
  double nu = 0.0;
  bool flip = false;
};

struct LossBounds {
  IntervalVector grad;  // d loss / d logits
  Interval loss;        // loss at the nominal label
};

/// MSE: gradient [2(y_L - y - nu), 2(y_U - y + nu)]; loss case split on whether y is reachable.
LossBounds loss_grad_bounds_mse(const IntervalVector& logits, const Eigen::VectorXd& y, double nu);
/// Cross entropy: softmax bounds, gradient p - y, with y ranging over {0, 1} per index when flipping.
LossBounds loss_grad_bounds_ce(const IntervalVector& logits, int label, bool flip);
LossBounds loss_bounds(LossKind loss, const IntervalVector& logits, const Target& y, const LabelBall& ball);

/// Interval bounds of the flat parameter gradient given forward bounds and a
/// loss-gradient enclosure. Frozen layers get [0, 0].
IntervalVector backward_bounds(const ParamBox& box, const LayerBounds& forward, const IntervalVector& dloss_dlogits);

/// Full pipeline for one sample: forward bounds, loss bounds, backward bounds.
IntervalVector gradient_bounds(const ParamBox& box, const IntervalVector& x, const Target& y, const LabelBall& ball,
                               BoundMode mode);

/// Clean bounds (delta) and poisoned bounds (delta tilde) for one sample.
struct SampleGradBounds {
  IntervalVector clean;
  IntervalVector poisoned;
};

/// Clean: point input, exact label. Poisoned: input ball of radius eps and the
/// label ball. The poisoned enclosure is widened to contain the clean one.
SampleGradBounds grad_bounds_sample(const ParamBox& box, const Eigen::VectorXd& x, const Target& y, double eps,
                                    const LabelBall& ball, BoundMode mode);

}  // namespace agt
