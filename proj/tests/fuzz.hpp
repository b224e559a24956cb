#pragma once

// Monte Carlo containment fuzzing of the bound propagation pipeline, shared by
// the unit tests and the acceptance run.

#include "agt/bound_prop.hpp"

#include "support.hpp"

#include <array>
#include <string>

namespace agt::test {

struct FuzzStats {
  long checks = 0;
  long violations = 0;
  double degenerate_error = 0.0;  // max abs error of point-box bounds against exact values
  std::string first_failure;

  void fail(const std::string& what) {
    ++violations;
    if (first_failure.empty()) first_failure = what;
  }
};

inline Target random_target(std::mt19937_64& rng, const DenseReluNetwork& net) {
  if (net.loss() == LossKind::CrossEntropy) return Target::of_class(static_cast<int>(rng() % net.output_dim()));
  return Target::of_value(uniform_vector(rng, net.output_dim(), -1, 1));
}

inline Target sample_label(std::mt19937_64& rng, const DenseReluNetwork& net, const Target& y, const LabelBall& ball) {
  if (net.loss() == LossKind::CrossEntropy) {
    return ball.flip ? Target::of_class(static_cast<int>(rng() % net.output_dim())) : y;
  }
  Eigen::VectorXd v = y.value;
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = sample_between(rng, v[i] - ball.nu, v[i] + ball.nu);
  return Target::of_value(v);
}

inline double max_abs(const IntervalVector& iv, const Eigen::VectorXd& exact) {
  return std::max((iv.lo() - exact).cwiseAbs().maxCoeff(), (iv.hi() - exact).cwiseAbs().maxCoeff());
}

/// One random network: degenerate exactness plus `samples` containment draws
/// for each of the three forward modes.
inline void fuzz_one(std::mt19937_64& rng, int samples, FuzzStats& st) {
  std::vector<int> dims{1 + static_cast<int>(rng() % 6)};
  const int layers = 1 + static_cast<int>(rng() % 3);
  for (int k = 0; k + 1 < layers; ++k) dims.push_back(2 + static_cast<int>(rng() % 15));
  const bool ce = rng() % 2 == 0;
  dims.push_back(ce ? 2 + static_cast<int>(rng() % 3) : 1 + static_cast<int>(rng() % 3));
  const LossKind loss = ce ? LossKind::CrossEntropy : LossKind::MeanSquaredError;
  const DenseReluNetwork net = random_net(rng, dims, loss);
  const Eigen::VectorXd x = uniform_vector(rng, dims.front(), -1, 1);
  const Target y = random_target(rng, net);
  constexpr std::array<BoundMode, 3> modes{BoundMode::Ibp, BoundMode::Crown, BoundMode::Tightest};

  // Degenerate inputs: every bound collapses to the exact value.
  {
    const ParamBox point(net);
    const Eigen::VectorXd logits = forward(net, x);
    const Eigen::VectorXd g = grad(net, x, y);
    const Eigen::VectorXd dl = loss_gradient(loss, logits, y);
    const double l = loss_value(loss, logits, y);
    for (BoundMode m : modes) {
      const LayerBounds fwd = forward_bounds(point, IntervalVector::point(x), m);
      const LossBounds lb = loss_bounds(loss, fwd.logits(), y, LabelBall{});
      const IntervalVector bg = backward_bounds(point, fwd, lb.grad);
      const double err = std::max({max_abs(fwd.logits(), logits), max_abs(lb.grad, dl), max_abs(bg, g),
                                   std::abs(lb.loss.lo - l), std::abs(lb.loss.hi - l)});
      st.degenerate_error = std::max(st.degenerate_error, err);
      const auto s = grad_bounds_sample(point, x, y, 0.0, LabelBall{}, m);
      st.degenerate_error = std::max({st.degenerate_error, max_abs(s.clean, g), max_abs(s.poisoned, g)});
    }
  }

  const double rel = uniform(rng, 0.0, 0.1);
  const ParamBox box = random_box(rng, net, rel);
  const double eps = rng() % 4 == 0 ? 0.0 : uniform(rng, 0.0, 0.2);
  LabelBall ball;
  if (ce) {
    ball.flip = rng() % 2 == 0;
  } else {
    ball.nu = rng() % 3 == 0 ? 0.0 : uniform(rng, 0.0, 0.2);
  }
  const IntervalVector xin = IntervalVector::ball(x, eps);

  struct Bounds {
    LayerBounds fwd;
    LossBounds lb;
    IntervalVector grad;
  };
  std::vector<Bounds> bounds;
  for (BoundMode m : modes) {
    Bounds b;
    b.fwd = forward_bounds(box, xin, m);
    b.lb = loss_bounds(loss, b.fwd.logits(), y, ball);
    b.grad = backward_bounds(box, b.fwd, b.lb.grad);
    bounds.push_back(std::move(b));
  }
  const SampleGradBounds sgb = grad_bounds_sample(box, x, y, eps, ball, BoundMode::Tightest);

  for (int s = 0; s < samples; ++s) {
    const DenseReluNetwork th = sample_net(rng, box);
    const Eigen::VectorXd xs = sample_in(rng, xin.lo(), xin.hi());
    const Target ys = sample_label(rng, net, y, ball);
    const ForwardTrace tr = forward_trace(th, xs);
    const Eigen::VectorXd& logits = tr.pre.back();
    const double l = loss_value(loss, logits, y);
    const Eigen::VectorXd dl = loss_gradient(loss, logits, ys);
    const Eigen::VectorXd g = grad(th, xs, ys);
    for (std::size_t mi = 0; mi < modes.size(); ++mi) {
      const Bounds& b = bounds[mi];
      const std::string tag = to_string(modes[mi]);
      for (std::size_t k = 0; k < tr.pre.size(); ++k) {
        ++st.checks;
        if (!inside(tr.pre[k], b.fwd.pre[k])) st.fail(tag + ": pre-activation layer " + std::to_string(k + 1));
      }
      ++st.checks;
      if (!inside(l, b.lb.loss.lo, b.lb.loss.hi)) st.fail(tag + ": loss");
      ++st.checks;
      if (!inside(dl, b.lb.grad)) st.fail(tag + ": loss gradient");
      ++st.checks;
      if (!inside(g, b.grad)) st.fail(tag + ": parameter gradient");
    }
    ++st.checks;
    if (!inside(g, sgb.poisoned)) st.fail("sample poisoned gradient bounds");
    // Clean bounds hold for the exact sample and any parameters in the box.
    ++st.checks;
    if (!inside(grad(th, x, y), sgb.clean)) st.fail("sample clean gradient bounds");
  }
}

}  // namespace agt::test
