#include "agt/bound_prop.hpp"

#include "doctest.h"
#include "fuzz.hpp"
#include "support.hpp"

using namespace agt;
using namespace agt::test;

TEST_CASE("ParamBox keeps the nominal inside") {
  auto rng = rng_for(31);
  const auto net = random_net(rng, {2, 3, 2}, LossKind::CrossEntropy);
  const ParamBox point(net);
  CHECK(point.lo() == net.flat());
  CHECK(point.hi() == net.flat());
  CHECK(point.width().isZero());
  Eigen::VectorXd lo = net.flat(), hi = net.flat();
  lo[0] += 1e-3;
  CHECK_THROWS_AS(ParamBox(net, lo, hi), InvalidInput);
  const ParamBox box = random_box(rng, net, 0.1);
  CHECK(box.contains(net.flat()));
  CHECK(box.weight(1).lo() == [&] {
    DenseReluNetwork n = net;
    n.set_flat(box.lo());
    return n.weight(1);
  }());
}

TEST_CASE("ReLU relaxations bound ReLU on the interval") {
  auto rng = rng_for(32);
  for (int t = 0; t < 500; ++t) {
    const double l = uniform(rng, -3, 3), u = l + uniform(rng, 0, 3);
    const auto r = ActivationRelaxation::relu(l, u);
    for (int s = 0; s < 20; ++s) {
      const double z = uniform(rng, l, u);
      CHECK(r.alpha_l * (z + r.beta_l) <= std::max(z, 0.0) + 1e-12);
      CHECK(r.alpha_u * (z + r.beta_u) >= std::max(z, 0.0) - 1e-12);
    }
  }
  const auto dead = ActivationRelaxation::relu(-2, -1);
  CHECK(dead.alpha_l == 0.0);
  CHECK(dead.alpha_u == 0.0);
  const auto live = ActivationRelaxation::relu(1, 2);
  CHECK(live.alpha_l == 1.0);
  CHECK(live.alpha_u == 1.0);
  const auto mixed = ActivationRelaxation::relu(-1, 3);
  CHECK(mixed.alpha_u == doctest::Approx(0.75));
  CHECK(mixed.beta_u == doctest::Approx(1.0));
  CHECK(mixed.alpha_l == 1.0);
  CHECK(ActivationRelaxation::relu(-3, 1).alpha_l == 0.0);
}

TEST_CASE("point box and point input reproduce the nominal forward pass") {
  auto rng = rng_for(33);
  const auto net = random_net(rng, {3, 5, 4, 2}, LossKind::CrossEntropy);
  const Eigen::VectorXd x = uniform_vector(rng, 3, -1, 1);
  const Eigen::VectorXd logits = forward(net, x);
  for (BoundMode m : {BoundMode::Ibp, BoundMode::Crown, BoundMode::Tightest}) {
    const auto fwd = forward_bounds(ParamBox(net), IntervalVector::point(x), m);
    CHECK(max_abs(fwd.logits(), logits) <= 1e-10);
  }
}

TEST_CASE("single affine layer: CROWN, IBP and the exact image coincide") {
  auto rng = rng_for(34);
  const auto net = random_net(rng, {4, 3}, LossKind::MeanSquaredError);
  const ParamBox box = random_box(rng, net, 0.1);
  const IntervalVector x = IntervalVector::ball(uniform_vector(rng, 4, -1, 1), 0.2);
  const auto ibp = ibp_forward(box, x).logits();
  const auto crown = crown_forward(box, x).logits();
  CHECK((ibp.lo() - crown.lo()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((ibp.hi() - crown.hi()).cwiseAbs().maxCoeff() <= 1e-12);
  // Exact per-entry image: sum of exact scalar interval products plus the bias interval.
  for (Eigen::Index j = 0; j < 3; ++j) {
    Interval acc = box.bias(0)[j];
    for (Eigen::Index i = 0; i < 4; ++i) acc = acc + box.weight(0)(j, i) * x[i];
    CHECK(ibp.lo()[j] == doctest::Approx(acc.lo).epsilon(1e-12));
    CHECK(ibp.hi()[j] == doctest::Approx(acc.hi).epsilon(1e-12));
  }
}

TEST_CASE("ReLU identity region: CROWN equals the composed affine bounds") {
  // Positive weights, biases and inputs keep every hidden pre-activation positive.
  auto rng = rng_for(35);
  const Eigen::MatrixXd w1 = uniform_matrix(rng, 4, 3, 0.1, 1.0), w2 = uniform_matrix(rng, 2, 4, -1.0, 1.0);
  const Eigen::VectorXd b1 = uniform_vector(rng, 4, 0.5, 1.0), b2 = uniform_vector(rng, 2, -0.5, 0.5);
  const DenseReluNetwork net({w1, w2}, {b1, b2}, LossKind::MeanSquaredError);
  const Eigen::VectorXd c = uniform_vector(rng, 3, 0.5, 1.0);
  const IntervalVector x = IntervalVector::ball(c, 0.1);
  const auto fwd = crown_forward(ParamBox(net), x);
  REQUIRE(fwd.pre[0].lo().minCoeff() > 0.0);
  const Eigen::MatrixXd m = w2 * w1;
  const Eigen::VectorXd centre = m * c + w2 * b1 + b2;
  const Eigen::VectorXd radius = m.cwiseAbs() * Eigen::VectorXd::Constant(3, 0.1);
  CHECK((fwd.logits().lo() - (centre - radius)).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((fwd.logits().hi() - (centre + radius)).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("CROWN needs the earlier layers' bounds") {
  auto rng = rng_for(36);
  const auto net = random_net(rng, {2, 3, 3, 2}, LossKind::CrossEntropy);
  LayerBounds empty;
  empty.input = IntervalVector::point(Eigen::Vector2d(0, 0));
  CHECK_THROWS_AS(crown_coefficients(ParamBox(net), empty, 3), InvalidInput);
  CHECK_THROWS_AS(forward_bounds(ParamBox(net), IntervalVector::point(Eigen::Vector3d(0, 0, 0)), BoundMode::Ibp),
                  InvalidInput);
}

TEST_CASE("tightest is never wider than IBP or CROWN") {
  auto rng = rng_for(37);
  for (int t = 0; t < 30; ++t) {
    const auto net = random_net(rng, {3, 8, 8, 2}, LossKind::CrossEntropy);
    const ParamBox box = random_box(rng, net, 0.1);
    const IntervalVector x = IntervalVector::ball(uniform_vector(rng, 3, -1, 1), 0.1);
    const auto ibp = ibp_forward(box, x), crown = crown_forward(box, x), tight = tightest_forward(box, x);
    for (std::size_t k = 0; k < tight.pre.size(); ++k) {
      const Eigen::VectorXd wt = tight.pre[k].width();
      CHECK((wt.array() <= ibp.pre[k].width().array() + 1e-12).all());
      CHECK((wt.array() <= crown.pre[k].width().array() + 1e-12).all());
    }
  }
}

TEST_CASE("MSE loss bounds") {
  const IntervalVector z(Eigen::VectorXd::Constant(1, 0.5), Eigen::VectorXd::Constant(1, 1.0));
  const auto lb = loss_grad_bounds_mse(z, Eigen::VectorXd::Zero(1), 0.1);
  CHECK(lb.grad.lo()[0] == doctest::Approx(0.8));
  CHECK(lb.grad.hi()[0] == doctest::Approx(2.2));
  CHECK(lb.loss.lo == doctest::Approx(0.25));
  CHECK(lb.loss.hi == doctest::Approx(1.0));

  const IntervalVector p = IntervalVector::point(Eigen::Vector2d(0.3, 0.4));
  const auto exact = loss_grad_bounds_mse(p, Eigen::Vector2d(0.3, 0.4), 0.0);
  CHECK(exact.grad.lo().isZero());
  CHECK(exact.grad.hi().isZero());
  CHECK(exact.loss.hi == 0.0);

  const IntervalVector straddle(Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, 2.0));
  const auto s = loss_grad_bounds_mse(straddle, Eigen::VectorXd::Zero(1), 0.0);
  CHECK(s.loss.lo == 0.0);
  CHECK(s.loss.hi == 4.0);
}

TEST_CASE("cross-entropy loss bounds") {
  const auto sym = loss_grad_bounds_ce(IntervalVector::point(Eigen::Vector2d(0.7, 0.7)), 0, false);
  CHECK(sym.grad.lo()[1] == doctest::Approx(0.5));
  CHECK(sym.grad.hi()[1] == doctest::Approx(0.5));
  CHECK(sym.grad.lo()[0] == doctest::Approx(-0.5));

  const Eigen::Vector3d z(0.2, -1.0, 1.3);
  const auto pt = loss_grad_bounds_ce(IntervalVector::point(z), 2, false);
  Eigen::VectorXd expect = softmax(z);
  expect[2] -= 1.0;
  CHECK(max_abs(pt.grad, expect) <= 1e-12);
  CHECK(pt.loss.lo == doctest::Approx(-std::log(softmax(z)[2])));

  auto rng = rng_for(38);
  for (int t = 0; t < 50; ++t) {
    const Eigen::VectorXd lo = uniform_vector(rng, 4, -3, 3);
    const IntervalVector box(lo, lo + uniform_vector(rng, 4, 0, 2));
    const int label = static_cast<int>(rng() % 4);
    for (bool flip : {false, true}) {
      const auto lb = loss_grad_bounds_ce(box, label, flip);
      for (int s = 0; s < 100; ++s) {
        const Eigen::VectorXd zs = sample_in(rng, box.lo(), box.hi());
        const int ys = flip ? static_cast<int>(rng() % 4) : label;
        CHECK(inside(loss_gradient(LossKind::CrossEntropy, zs, Target::of_class(ys)), lb.grad));
        CHECK(inside(loss_value(LossKind::CrossEntropy, zs, Target::of_class(label)), lb.loss.lo, lb.loss.hi));
      }
    }
  }
}

TEST_CASE("unsupported label balls are rejected") {
  const IntervalVector z = IntervalVector::point(Eigen::Vector2d(0, 1));
  CHECK_THROWS_AS(loss_bounds(LossKind::CrossEntropy, z, Target::of_class(0), LabelBall{0.1, false}), InvalidInput);
  CHECK_THROWS_AS(loss_bounds(LossKind::MeanSquaredError, z, Target::of_value(Eigen::Vector2d(0, 0)), LabelBall{0.0, true}),
                  InvalidInput);
  auto rng = rng_for(39);
  const auto net = random_net(rng, {2, 2}, LossKind::CrossEntropy);
  CHECK_THROWS_AS(grad_bounds_sample(ParamBox(net), Eigen::Vector2d(0, 0), Target::of_class(0), -0.1, LabelBall{},
                                     BoundMode::Ibp),
                  InvalidInput);
}

TEST_CASE("dead layer gives zero weight gradients") {
  auto rng = rng_for(40);
  Eigen::MatrixXd w1 = uniform_matrix(rng, 3, 2, -1, 1);
  const Eigen::VectorXd b1 = Eigen::VectorXd::Constant(3, -10.0);
  const DenseReluNetwork net({w1, uniform_matrix(rng, 2, 3, -1, 1)}, {b1, Eigen::Vector2d(0, 0)},
                             LossKind::CrossEntropy);
  const ParamBox box = random_box(rng, net, 0.05);
  const IntervalVector x = IntervalVector::ball(Eigen::Vector2d(0.1, -0.2), 0.1);
  const auto fwd = forward_bounds(box, x, BoundMode::Tightest);
  REQUIRE(fwd.pre[0].hi().maxCoeff() < 0.0);
  const auto lb = loss_bounds(LossKind::CrossEntropy, fwd.logits(), Target::of_class(1), LabelBall{0, true});
  const auto g = backward_bounds(box, fwd, lb.grad);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    // Layer 1 parameters (W1, b1) and W2 all multiply a dead activation or gate.
    if (i < net.bias_offset(1)) {
      CHECK(g.lo()[i] == 0.0);
      CHECK(g.hi()[i] == 0.0);
    }
  }
}

TEST_CASE("sample bounds: degenerate and nested") {
  auto rng = rng_for(41);
  const auto net = random_net(rng, {3, 6, 2}, LossKind::CrossEntropy);
  const Eigen::VectorXd x = uniform_vector(rng, 3, -1, 1);
  const Target y = Target::of_class(1);
  const auto exact = grad(net, x, y);
  const auto d = grad_bounds_sample(ParamBox(net), x, y, 0.0, LabelBall{}, BoundMode::Tightest);
  CHECK(max_abs(d.clean, exact) <= 1e-10);
  CHECK(max_abs(d.poisoned, exact) <= 1e-10);
  const ParamBox box = random_box(rng, net, 0.05);
  for (double eps : {0.0, 0.01, 0.1}) {
    const auto s = grad_bounds_sample(box, x, y, eps, LabelBall{0, eps > 0.05}, BoundMode::Tightest);
    CHECK(s.poisoned.contains(s.clean));
    CHECK(((s.poisoned.hi() - s.clean.hi()).array() >= 0).all());
    CHECK(((s.poisoned.lo() - s.clean.lo()).array() <= 0).all());
  }
}

TEST_CASE("monotone inclusion under IBP: wider box, eps or nu never tightens") {
  auto rng = rng_for(42);
  for (int t = 0; t < 30; ++t) {
    const bool ce = t % 2 == 0;
    const auto net = random_net(rng, {3, 6, 6, 2}, ce ? LossKind::CrossEntropy : LossKind::MeanSquaredError);
    const Eigen::VectorXd x = uniform_vector(rng, 3, -1, 1);
    const Target y = ce ? Target::of_class(0) : Target::of_value(uniform_vector(rng, 2, -1, 1));
    const ParamBox small = random_box(rng, net, 0.03);
    const ParamBox big(net, small.lo() - uniform_vector(rng, net.num_params(), 0, 0.02),
                       small.hi() + uniform_vector(rng, net.num_params(), 0, 0.02));
    const double eps = uniform(rng, 0, 0.05);
    const LabelBall b1{ce ? 0.0 : 0.05, false}, b2{ce ? 0.0 : 0.1, ce};
    const auto a = grad_bounds_sample(small, x, y, eps, b1, BoundMode::Ibp);
    const auto b = grad_bounds_sample(big, x, y, eps * 2, b2, BoundMode::Ibp);
    CHECK(b.clean.contains(a.clean, 1e-12));
    CHECK(b.poisoned.contains(a.poisoned, 1e-12));
    const auto fa = ibp_forward(small, IntervalVector::ball(x, eps)).logits();
    const auto fb = ibp_forward(big, IntervalVector::ball(x, 2 * eps)).logits();
    CHECK(fb.contains(fa, 1e-12));
  }
}

TEST_CASE("containment fuzz on random small networks") {
  auto rng = rng_for(43);
  FuzzStats st;
  for (int n = 0; n < 12; ++n) fuzz_one(rng, 200, st);
  INFO(st.first_failure);
  CHECK(st.violations == 0);
  CHECK(st.degenerate_error <= 1e-10);
  CHECK(st.checks > 10000);
}
