#include "agt/network.hpp"

#include "doctest.h"
#include "support.hpp"

#include <cmath>
#include <limits>
#include <set>

using namespace agt;

namespace {

// Straight-line re-evaluation with explicit loops, independent of the library's kernels.
Eigen::VectorXd loop_forward(const DenseReluNetwork& net, const Eigen::VectorXd& x) {
  std::vector<double> z(x.data(), x.data() + x.size());
  for (int k = 0; k < net.num_layers(); ++k) {
    const auto& w = net.weight(k);
    std::vector<double> out(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      long double s = net.bias(k)[i];
      for (Eigen::Index j = 0; j < w.cols(); ++j) s += static_cast<long double>(w(i, j)) * z[static_cast<std::size_t>(j)];
      out[static_cast<std::size_t>(i)] = static_cast<double>(s);
    }
    if (k + 1 < net.num_layers())
      for (auto& v : out) v = std::max(v, 0.0);
    z = out;
  }
  return Eigen::Map<Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
}

Dataset tiny_classification() {
  Dataset d;
  d.task = Task::Classification;
  d.num_classes = 2;
  d.features.resize(4, 2);
  d.features << -1, -1, -1, -0.5, 1, 1, 1, 0.5;
  d.classes = {0, 0, 1, 1};
  return d;
}

}  // namespace

TEST_CASE("forward: constant, identity and loop oracle") {
  DenseReluNetwork zero({3, 2}, LossKind::MeanSquaredError);
  zero.bias(0) = Eigen::Vector2d(1.5, -2.0);
  CHECK(forward(zero, Eigen::Vector3d(4, 5, 6)) == Eigen::Vector2d(1.5, -2.0));

  DenseReluNetwork id({3, 3}, LossKind::MeanSquaredError);
  id.weight(0) = Eigen::MatrixXd::Identity(3, 3);
  const Eigen::Vector3d x(-1, 0.25, 7);
  CHECK(forward(id, x) == x);

  auto rng = agt::test::rng_for(21);
  for (int t = 0; t < 20; ++t) {
    const auto net = agt::test::random_net(rng, {5, 7, 3}, LossKind::CrossEntropy);
    const Eigen::VectorXd in = agt::test::uniform_vector(rng, 5, -2, 2);
    CHECK((forward(net, in) - loop_forward(net, in)).cwiseAbs().maxCoeff() <= 1e-12);
  }
  CHECK_THROWS_AS(forward(id, Eigen::Vector2d(1, 2)), InvalidInput);
}

TEST_CASE("network construction validates shapes") {
  CHECK_THROWS_AS(DenseReluNetwork({3}, LossKind::MeanSquaredError), InvalidInput);
  CHECK_THROWS_AS(DenseReluNetwork({3, 1}, LossKind::CrossEntropy), InvalidInput);
  CHECK_THROWS_AS(DenseReluNetwork({Eigen::MatrixXd::Zero(2, 3)}, {Eigen::VectorXd::Zero(3)}, LossKind::MeanSquaredError),
                  InvalidInput);
  CHECK_THROWS_AS(DenseReluNetwork({Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(2, 4)},
                                   {Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)}, LossKind::MeanSquaredError),
                  InvalidInput);
}

TEST_CASE("flat parameter layout round-trips") {
  auto rng = agt::test::rng_for(22);
  auto net = agt::test::random_net(rng, {3, 4, 2}, LossKind::CrossEntropy);
  CHECK(net.num_params() == 3 * 4 + 4 + 4 * 2 + 2);
  const Eigen::VectorXd theta = net.flat();
  CHECK(theta[net.weight_offset(1) + 1] == net.weight(1)(0, 1));
  CHECK(theta[net.bias_offset(0) + 3] == net.bias(0)[3]);
  DenseReluNetwork other({3, 4, 2}, LossKind::CrossEntropy);
  other.set_flat(theta);
  CHECK(other.flat() == theta);
  CHECK_THROWS_AS(other.set_flat(Eigen::VectorXd::Zero(3)), InvalidInput);
}

TEST_CASE("he_uniform is seeded and bounded") {
  const auto a = DenseReluNetwork::he_uniform({10, 8, 2}, LossKind::CrossEntropy, 5);
  const auto b = DenseReluNetwork::he_uniform({10, 8, 2}, LossKind::CrossEntropy, 5);
  const auto c = DenseReluNetwork::he_uniform({10, 8, 2}, LossKind::CrossEntropy, 6);
  CHECK(a.flat() == b.flat());
  CHECK(a.flat() != c.flat());
  CHECK(a.weight(0).cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 10.0));
  CHECK(a.bias(0).isZero());
}

TEST_CASE("loss values and gradients") {
  const Eigen::Vector2d y(0.3, -0.7);
  CHECK(loss_value(LossKind::MeanSquaredError, y, Target::of_value(y)) == 0.0);
  CHECK(loss_gradient(LossKind::MeanSquaredError, y, Target::of_value(y)).isZero());
  CHECK(loss_value(LossKind::MeanSquaredError, Eigen::Vector2d(1, 1), Target::of_value(Eigen::Vector2d(0, 3))) == 5.0);

  const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(4, 0.37);
  const Eigen::VectorXd g = loss_gradient(LossKind::CrossEntropy, uniform, Target::of_class(2));
  for (int i = 0; i < 4; ++i) CHECK(g[i] == doctest::Approx(i == 2 ? 0.25 - 1.0 : 0.25).epsilon(1e-15));
  CHECK(loss_value(LossKind::CrossEntropy, uniform, Target::of_class(1)) == doctest::Approx(std::log(4.0)));
  CHECK(softmax(Eigen::Vector3d(1000, 0, -1000)).sum() == doctest::Approx(1.0));
  CHECK(loss_value(LossKind::CrossEntropy, Eigen::Vector2d(50, -50), Target::of_class(0)) >= 0.0);
  CHECK_THROWS_AS(loss_value(LossKind::CrossEntropy, uniform, Target::of_class(4)), InvalidInput);
  CHECK_THROWS_AS(loss_gradient(LossKind::CrossEntropy, uniform, Target::of_class(-1)), InvalidInput);
}

TEST_CASE("gradient matches central finite differences") {
  auto rng = agt::test::rng_for(23);
  for (int t = 0; t < 40; ++t) {
    std::vector<int> dims{1 + static_cast<int>(rng() % 8)};
    const int layers = 1 + static_cast<int>(rng() % 3);
    for (int k = 0; k < layers; ++k) dims.push_back(2 + static_cast<int>(rng() % 7));
    const bool ce = t % 2 == 0;
    const auto net = agt::test::random_net(rng, dims, ce ? LossKind::CrossEntropy : LossKind::MeanSquaredError);
    const Eigen::VectorXd x = agt::test::uniform_vector(rng, dims.front(), -1, 1);
    const Target y = ce ? Target::of_class(static_cast<int>(rng() % dims.back()))
                        : Target::of_value(agt::test::uniform_vector(rng, dims.back(), -1, 1));
    const Eigen::VectorXd g = grad(net, x, y);
    Eigen::VectorXd fd(g.size());
    const double h = 1e-5;
    DenseReluNetwork probe = net;
    const Eigen::VectorXd theta = net.flat();
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      Eigen::VectorXd p = theta, m = theta;
      p[i] += h;
      m[i] -= h;
      probe.set_flat(p);
      const double lp = loss_value(net.loss(), forward(probe, x), y);
      probe.set_flat(m);
      const double lm = loss_value(net.loss(), forward(probe, x), y);
      fd[i] = (lp - lm) / (2 * h);
    }
    CHECK((fd - g).norm() <= 1e-4 * std::max(1.0, g.norm()));
  }
}

TEST_CASE("frozen layers get zero gradient and no update") {
  auto rng = agt::test::rng_for(24);
  auto net = agt::test::random_net(rng, {2, 3, 2}, LossKind::CrossEntropy);
  net.set_trainable({false, true});
  const Eigen::VectorXd g = grad(net, Eigen::Vector2d(0.5, -0.2), Target::of_class(1));
  CHECK(g.segment(0, net.bias_offset(0) + 3).isZero());
  Dataset d = tiny_classification();
  const Eigen::MatrixXd w0 = net.weight(0);
  sgd_step(net, d, 0.5, std::nullopt);
  CHECK(net.weight(0) == w0);
  CHECK_THROWS_AS(net.set_trainable({true}), InvalidInput);
}

TEST_CASE("sgd_step: single-sample update and clipping saturation") {
  auto rng = agt::test::rng_for(25);
  auto net = agt::test::random_net(rng, {2, 3, 2}, LossKind::CrossEntropy);
  Dataset one = tiny_classification().subset(std::vector<std::size_t>{2});
  const Eigen::VectorXd g = grad(net, one.x(0), one.target(0));
  const Eigen::VectorXd theta = net.flat();
  DenseReluNetwork a = net;
  sgd_step(a, one, 0.3, std::nullopt);
  CHECK((a.flat() - (theta - 0.3 * g)).cwiseAbs().maxCoeff() == 0.0);

  const double kappa = 0.5 * g.cwiseAbs().minCoeff();
  if (kappa > 0) {
    DenseReluNetwork b = net;
    sgd_step(b, one, 0.3, kappa);
    const Eigen::VectorXd expect = theta - 0.3 * (kappa * g.cwiseSign());
    CHECK((b.flat() - expect).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK_THROWS_AS(sgd_step(a, one.subset(std::vector<std::size_t>{}), 0.1, std::nullopt), InvalidInput);
}

TEST_CASE("infinite clipping equals no clipping bit for bit") {
  auto rng = agt::test::rng_for(26);
  const auto net = agt::test::random_net(rng, {2, 6, 2}, LossKind::CrossEntropy);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 3;
  cfg.lr = 0.2;
  cfg.seed = 4;
  const auto plain = sgd_train(net, tiny_classification(), cfg);
  cfg.clip = std::numeric_limits<double>::infinity();
  const auto clipped = sgd_train(net, tiny_classification(), cfg);
  CHECK(plain.net.flat() == clipped.net.flat());
}

TEST_CASE("training a separable set lowers the loss every epoch") {
  auto net = DenseReluNetwork::he_uniform({2, 8, 2}, LossKind::CrossEntropy, 3);
  const Dataset d = tiny_classification();
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  cfg.lr = 0.2;
  double prev = mean_loss(net, d);
  for (int e = 0; e < 2; ++e) {
    cfg.seed = static_cast<std::uint64_t>(e);
    net = sgd_train(net, d, cfg).net;
    const double now = mean_loss(net, d);
    CHECK(now < prev);
    prev = now;
  }
  cfg.epochs = 200;
  net = sgd_train(net, d, cfg).net;
  CHECK(mean_loss(net, d) < 0.05);
  CHECK(accuracy(net, d) == 1.0);
}

TEST_CASE("train config validation and learning rate schedule") {
  TrainConfig cfg;
  cfg.lr = 2.0;
  cfg.lr_decay = 0.5;
  CHECK(cfg.learning_rate(0) == 2.0);
  CHECK(cfg.learning_rate(2) == 1.0);
  cfg.lr = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg.lr = 1.0;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg.batch_size = 1;
  cfg.clip = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg.clip.reset();
  cfg.lr_decay = -1;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
}

TEST_CASE("batch schedule covers each epoch once and keeps the partial batch") {
  Dataset d = tiny_classification().subset(std::vector<std::size_t>{0, 1, 2, 3, 0, 1, 2});
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 3;
  cfg.seed = 9;
  const auto s = batch_schedule(d, cfg);
  REQUIRE(s.size() == 6);
  CHECK(s[2].size() == 1);
  for (int e = 0; e < 2; ++e) {
    std::multiset<std::size_t> seen;
    for (int b = 0; b < 3; ++b) seen.insert(s[e * 3 + b].begin(), s[e * 3 + b].end());
    CHECK(seen == std::multiset<std::size_t>{0, 1, 2, 3, 4, 5, 6});
  }
  CHECK(batch_schedule(d, cfg) == s);

  d.poisonable = {1, 1, 0, 0, 0, 0, 0};
  cfg.poisonable_fraction = 0.34;
  for (const auto& batch : batch_schedule(d, cfg)) {
    REQUIRE(batch.size() == 3);
    CHECK(d.is_poisonable(static_cast<Eigen::Index>(batch[0])));
    CHECK(!d.is_poisonable(static_cast<Eigen::Index>(batch[1])));
  }
  Dataset empty = d.subset(std::vector<std::size_t>{});
  cfg.poisonable_fraction.reset();
  CHECK_THROWS_AS(batch_schedule(empty, cfg), InvalidInput);
}
