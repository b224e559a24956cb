#include "agt/certify.hpp"
#include "agt/data.hpp"

#include "doctest.h"
#include "oracles.hpp"
#include "support.hpp"

using namespace agt;

namespace {

ParamBox scaled_box(const DenseReluNetwork& net, const Eigen::VectorXd& radius, double scale) {
  const Eigen::VectorXd t = net.flat();
  return ParamBox(net, t - scale * radius, t + scale * radius);
}

}  // namespace

TEST_CASE("reachable classes from hand-written logit bounds") {
  const IntervalVector a(Eigen::Vector3d(0.0, 1.0, -2.0), Eigen::Vector3d(0.5, 2.0, 0.9));
  CHECK(reachable_classes(a) == std::vector<int>{1});
  const IntervalVector b(Eigen::Vector3d(0.0, 0.4, -2.0), Eigen::Vector3d(0.5, 2.0, 0.9));
  CHECK(reachable_classes(b) == std::vector<int>{0, 1, 2});
  // Touching bounds: the classes can tie, so neither is excluded.
  const IntervalVector c(Eigen::Vector2d(0.0, 1.0), Eigen::Vector2d(1.0, 2.0));
  CHECK(reachable_classes(c) == std::vector<int>{0, 1});
}

TEST_CASE("point box certifies exactly the correctly classified points") {
  auto rng = agt::test::rng_for(1);
  const DenseReluNetwork net = agt::test::random_net(rng, {2, 8, 3}, LossKind::CrossEntropy);
  const ParamBox box(net);
  Dataset data = gen_halfmoons(60, 0.1, 2);
  data.num_classes = 3;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const Certificate c = certified_prediction(box, data.x(i), data.target(i));
    const int pred = argmax(forward(net, data.x(i)));
    CHECK(c.nominal_prediction == pred);
    CHECK(c.reachable == std::vector<int>{pred});
    CHECK(c.certified == (pred == data.classes[static_cast<std::size_t>(i)]));
    CHECK(c.loss.lo == doctest::Approx(c.loss.hi).epsilon(1e-12));
  }
  CHECK(certified_accuracy(box, data) == accuracy(net, data));
}

TEST_CASE("a very wide box reaches every class and certifies nothing") {
  auto rng = agt::test::rng_for(2);
  const DenseReluNetwork net = agt::test::random_net(rng, {2, 6, 3}, LossKind::CrossEntropy);
  const ParamBox box = scaled_box(net, Eigen::VectorXd::Constant(net.num_params(), 1.0), 50.0);
  const Dataset data = gen_halfmoons(20, 0.1, 3);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const Certificate c = certified_prediction(box, data.x(i), data.target(i));
    CHECK(c.reachable == std::vector<int>{0, 1, 2});
    CHECK_FALSE(c.certified);
  }
  CHECK(certified_accuracy(box, data) == 0.0);
}

TEST_CASE("certification verdicts agree with enumeration over the box") {
  auto rng = agt::test::rng_for(3);
  agt::test::CertOracleStats st;
  for (int c = 0; c < 120; ++c) agt::test::cert_oracle_case(rng, st);
  INFO(st.first_failure);
  CHECK(st.unsound == 0);
  CHECK(st.reach_unsound == 0);
  CHECK(st.exact_mismatches == 0);
  CHECK(st.exact_cases > 20);
  MESSAGE("verdict agreement on all cases: " << st.cases - st.mismatches << " / " << st.cases);
}

TEST_CASE("nested boxes give nested reachable sets and monotone metrics") {
  auto rng = agt::test::rng_for(4);
  const DenseReluNetwork net = agt::test::random_net(rng, {2, 10, 2}, LossKind::CrossEntropy);
  const Eigen::VectorXd radius = agt::test::uniform_vector(rng, net.num_params(), 0.0, 1.0);
  const Dataset data = gen_halfmoons(80, 0.1, 4);
  double prev_acc = 2.0, prev_lo = 1e300, prev_hi = -1e300;
  std::vector<std::uint64_t> prev_masks(static_cast<std::size_t>(data.size()), 0);
  for (double scale : {0.0, 0.001, 0.01, 0.03, 0.1, 0.3}) {
    const ParamBox box = scaled_box(net, radius, scale);
    const auto certs = certify_dataset(box, data, 0.0, {}, BoundMode::Ibp);
    for (std::size_t i = 0; i < certs.size(); ++i) {
      const std::uint64_t mask = certs[i].reachable_mask();
      CHECK((mask & prev_masks[i]) == prev_masks[i]);
      prev_masks[i] = mask;
    }
    const double acc = certified_accuracy(box, data, BoundMode::Ibp);
    const Interval loss = loss_bound_testset(box, data, BoundMode::Ibp);
    CHECK(acc <= prev_acc);
    CHECK(loss.lo <= prev_lo);
    CHECK(loss.hi >= prev_hi);
    CHECK(acc <= accuracy(net, data));
    prev_acc = acc;
    prev_lo = loss.lo;
    prev_hi = loss.hi;
  }
}

TEST_CASE("loss bounds contain sampled parameter losses") {
  auto rng = agt::test::rng_for(5);
  for (LossKind kind : {LossKind::CrossEntropy, LossKind::MeanSquaredError}) {
    const bool ce = kind == LossKind::CrossEntropy;
    const DenseReluNetwork net = agt::test::random_net(rng, {3, 8, ce ? 3 : 2}, kind);
    const ParamBox box = agt::test::random_box(rng, net, 0.1);
    const ParamBox point(net);
    for (int p = 0; p < 20; ++p) {
      const Eigen::VectorXd x = agt::test::uniform_vector(rng, 3, 0, 1);
      const Target y = agt::test::random_target(rng, net);
      const Certificate pc = certified_prediction(point, x, y);
      const double nominal = loss_value(kind, forward(net, x), y);
      CHECK(pc.loss.lo == doctest::Approx(nominal).epsilon(1e-10));
      CHECK(pc.loss.hi == doctest::Approx(nominal).epsilon(1e-10));
      const Certificate c = certified_prediction(box, x, y);
      CHECK(c.loss.lo <= nominal);
      CHECK(c.loss.hi >= nominal);
      for (int s = 0; s < 200; ++s) {
        const DenseReluNetwork n = agt::test::sample_net(rng, box);
        CHECK(agt::test::inside(loss_value(kind, forward(n, x), y), c.loss.lo, c.loss.hi));
      }
    }
  }
}

TEST_CASE("backdoor certificate at radius zero is the prediction certificate") {
  auto rng = agt::test::rng_for(6);
  const DenseReluNetwork net = agt::test::random_net(rng, {2, 8, 3}, LossKind::CrossEntropy);
  const ParamBox box = agt::test::random_box(rng, net, 0.05);
  for (int p = 0; p < 50; ++p) {
    const Eigen::VectorXd x = agt::test::uniform_vector(rng, 2, -1, 1);
    const Target y = Target::of_class(argmax(forward(net, x)));
    const Certificate a = certified_prediction(box, x, y);
    const Certificate b = backdoor_certificate(box, x, y, 0.0);
    CHECK(a.certified == b.certified);
    CHECK(a.reachable == b.reachable);
    // Backdoor-certified implies prediction-certified.
    const Certificate t = backdoor_certificate(box, x, y, 0.05);
    if (t.certified) CHECK(a.certified);
  }
}

TEST_CASE("point box with a trigger radius is adversarial robustness") {
  auto rng = agt::test::rng_for(7);
  const DenseReluNetwork net = agt::test::random_net(rng, {2, 8, 2}, LossKind::CrossEntropy);
  const ParamBox box(net);
  int certified = 0;
  for (int p = 0; p < 100; ++p) {
    const Eigen::VectorXd x = agt::test::uniform_vector(rng, 2, -1, 1);
    const int label = argmax(forward(net, x));
    const Certificate c = backdoor_certificate(box, x, Target::of_class(label), 0.05);
    if (!c.certified) continue;
    ++certified;
    for (int s = 0; s < 200; ++s) {
      CHECK(argmax(forward(net, x + agt::test::uniform_vector(rng, 2, -0.05, 0.05))) == label);
    }
  }
  CHECK(certified > 10);
}

TEST_CASE("safe sets widen what a backdoor certificate accepts") {
  auto rng = agt::test::rng_for(8);
  const DenseReluNetwork net = agt::test::random_net(rng, {2, 6, 3}, LossKind::CrossEntropy);
  const ParamBox box = agt::test::random_box(rng, net, 0.2);
  for (int p = 0; p < 30; ++p) {
    const Eigen::VectorXd x = agt::test::uniform_vector(rng, 2, -1, 1);
    const Target y = Target::of_class(static_cast<int>(rng() % 3));
    CHECK(backdoor_certificate(box, x, y, 0.5, {0, 1, 2}).certified);
    if (backdoor_certificate(box, x, y, 0.5).certified) CHECK(backdoor_certificate(box, x, y, 0.5, {y.class_index, 0}).certified);
  }
}

TEST_CASE("regression certificates report logit and loss bounds only") {
  auto rng = agt::test::rng_for(9);
  const DenseReluNetwork net = agt::test::random_net(rng, {2, 4, 1}, LossKind::MeanSquaredError);
  const Certificate c =
      certified_prediction(agt::test::random_box(rng, net, 0.1), Eigen::Vector2d(0.3, 0.2), Target::of_value(Eigen::VectorXd::Constant(1, 0.5)));
  CHECK(c.label == -1);
  CHECK(c.reachable.empty());
  CHECK_FALSE(c.certified);
  CHECK(c.loss.lo <= c.loss.hi);
}

TEST_CASE("certification input errors") {
  auto rng = agt::test::rng_for(10);
  const DenseReluNetwork net = agt::test::random_net(rng, {2, 4, 2}, LossKind::CrossEntropy);
  const ParamBox box(net);
  Dataset empty;
  empty.features = RowMatrix(0, 2);
  empty.num_classes = 2;
  CHECK_THROWS_AS(certified_accuracy(box, empty), InvalidInput);
  CHECK_THROWS_AS(loss_bound_testset(box, empty), InvalidInput);
  Dataset reg;
  reg.task = Task::Regression;
  reg.features = RowMatrix::Zero(2, 2);
  reg.targets = RowMatrix::Zero(2, 2);
  CHECK_THROWS_AS(certified_accuracy(box, reg), InvalidInput);
  CHECK_THROWS_AS(backdoor_certificate(box, Eigen::Vector2d(0, 0), Target::of_class(0), -0.1), InvalidInput);
}
