#include "agt/network.hpp"

#include "agt/interval.hpp"
#include "agt/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace agt {

std::string to_string(LossKind k) { return k == LossKind::CrossEntropy ? "cross_entropy" : "mse"; }

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "cross_entropy" || s == "ce") return LossKind::CrossEntropy;
  if (s == "mse") return LossKind::MeanSquaredError;
  throw InvalidInput("unknown loss kind '" + s + "'");
}

DenseReluNetwork::DenseReluNetwork(std::vector<int> layer_dims, LossKind loss) : dims_(std::move(layer_dims)), loss_(loss) {
  if (dims_.size() < 2) throw InvalidInput("network needs at least an input and an output width");
  for (int d : dims_) {
    if (d <= 0) throw InvalidInput("layer widths must be positive");
  }
  if (loss_ == LossKind::CrossEntropy && dims_.back() < 2) {
    throw InvalidInput("cross entropy needs at least two outputs");
  }
  for (std::size_t k = 1; k < dims_.size(); ++k) {
    weights_.push_back(Eigen::MatrixXd::Zero(dims_[k], dims_[k - 1]));
    biases_.push_back(Eigen::VectorXd::Zero(dims_[k]));
  }
  trainable_.assign(weights_.size(), true);
}

DenseReluNetwork::DenseReluNetwork(std::vector<Eigen::MatrixXd> weights, std::vector<Eigen::VectorXd> biases,
                                   LossKind loss)
    : weights_(std::move(weights)), biases_(std::move(biases)), loss_(loss) {
  if (weights_.empty() || weights_.size() != biases_.size()) {
    throw InvalidInput("network needs one bias per weight matrix and at least one layer");
  }
  dims_.push_back(static_cast<int>(weights_[0].cols()));
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    if (weights_[k].cols() != dims_.back()) {
      throw InvalidInput("weight " + std::to_string(k) + " has " + std::to_string(weights_[k].cols()) +
                         " columns, expected " + std::to_string(dims_.back()));
    }
    if (biases_[k].size() != weights_[k].rows()) {
      throw InvalidInput("bias " + std::to_string(k) + " length does not match weight rows");
    }
    if (!weights_[k].allFinite() || !biases_[k].allFinite()) throw InvalidInput("non-finite parameter");
    dims_.push_back(static_cast<int>(weights_[k].rows()));
  }
  if (loss_ == LossKind::CrossEntropy && dims_.back() < 2) {
    throw InvalidInput("cross entropy needs at least two outputs");
  }
  trainable_.assign(weights_.size(), true);
}

DenseReluNetwork DenseReluNetwork::he_uniform(std::vector<int> layer_dims, LossKind loss, std::uint64_t seed) {
  DenseReluNetwork net(std::move(layer_dims), loss);
  std::mt19937_64 rng(seed);
  for (int k = 0; k < net.num_layers(); ++k) {
    const double limit = std::sqrt(6.0 / static_cast<double>(net.dims_[k]));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index i = 0; i < net.weights_[k].rows(); ++i) {
      for (Eigen::Index j = 0; j < net.weights_[k].cols(); ++j) net.weights_[k](i, j) = u(rng);
    }
  }
  return net;
}

void DenseReluNetwork::set_trainable(std::vector<bool> mask) {
  if (mask.size() != weights_.size()) throw InvalidInput("trainable mask needs one flag per layer");
  trainable_ = std::move(mask);
}

Eigen::Index DenseReluNetwork::num_params() const {
  Eigen::Index n = 0;
  for (std::size_t k = 0; k < weights_.size(); ++k) n += weights_[k].size() + biases_[k].size();
  return n;
}

Eigen::Index DenseReluNetwork::weight_offset(int k) const {
  Eigen::Index n = 0;
  for (int l = 0; l < k; ++l) n += weights_[l].size() + biases_[l].size();
  return n;
}

Eigen::Index DenseReluNetwork::bias_offset(int k) const { return weight_offset(k) + weights_[k].size(); }

Eigen::VectorXd DenseReluNetwork::flat() const {
  Eigen::VectorXd theta(num_params());
  Eigen::Index p = 0;
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    for (Eigen::Index i = 0; i < weights_[k].rows(); ++i) {
      for (Eigen::Index j = 0; j < weights_[k].cols(); ++j) theta[p++] = weights_[k](i, j);
    }
    for (Eigen::Index i = 0; i < biases_[k].size(); ++i) theta[p++] = biases_[k][i];
  }
  return theta;
}

void DenseReluNetwork::set_flat(const Eigen::VectorXd& theta) {
  if (theta.size() != num_params()) throw InvalidInput("set_flat: wrong parameter count");
  Eigen::Index p = 0;
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    for (Eigen::Index i = 0; i < weights_[k].rows(); ++i) {
      for (Eigen::Index j = 0; j < weights_[k].cols(); ++j) weights_[k](i, j) = theta[p++];
    }
    for (Eigen::Index i = 0; i < biases_[k].size(); ++i) biases_[k][i] = theta[p++];
  }
}

ForwardTrace forward_trace(const DenseReluNetwork& net, const Eigen::VectorXd& x) {
  if (x.size() != net.input_dim()) {
    throw InvalidInput("forward: input has " + std::to_string(x.size()) + " features, network expects " +
                       std::to_string(net.input_dim()));
  }
  ForwardTrace t;
  t.post.push_back(x);
  for (int k = 0; k < net.num_layers(); ++k) {
    Eigen::VectorXd z = kernels::matvec(net.weight(k), t.post.back()) + net.bias(k);
    t.pre.push_back(z);
    if (k + 1 < net.num_layers()) t.post.push_back(z.cwiseMax(0.0));
  }
  return t;
}

Eigen::VectorXd forward(const DenseReluNetwork& net, const Eigen::VectorXd& x) { return forward_trace(net, x).pre.back(); }

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const Eigen::Index n = logits.size();
  Eigen::VectorXd p(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) s += (j == i) ? 1.0 : std::exp(logits[j] - logits[i]);
    p[i] = 1.0 / s;
  }
  return p;
}

namespace {

void check_target(LossKind loss, const Eigen::VectorXd& logits, const Target& y) {
  if (loss == LossKind::CrossEntropy) {
    if (y.class_index < 0 || y.class_index >= logits.size()) {
      throw InvalidInput("class label " + std::to_string(y.class_index) + " outside [0, " +
                         std::to_string(logits.size()) + ")");
    }
  } else if (y.value.size() != logits.size()) {
    throw InvalidInput("regression target length does not match network output");
  }
}

double log_sum_exp_shifted(const Eigen::VectorXd& z, Eigen::Index i) {
  // log sum_j exp(z_j - z_i)
  const double m = z.maxCoeff();
  double s = 0.0;
  for (Eigen::Index j = 0; j < z.size(); ++j) s += std::exp(z[j] - m);
  return (m - z[i]) + std::log(s);
}

}  // namespace

double loss_value(LossKind loss, const Eigen::VectorXd& logits, const Target& y) {
  check_target(loss, logits, y);
  if (loss == LossKind::CrossEntropy) return log_sum_exp_shifted(logits, y.class_index);
  return (logits - y.value).squaredNorm();
}

Eigen::VectorXd loss_gradient(LossKind loss, const Eigen::VectorXd& logits, const Target& y) {
  check_target(loss, logits, y);
  if (loss == LossKind::CrossEntropy) {
    Eigen::VectorXd g = softmax(logits);
    g[y.class_index] -= 1.0;
    return g;
  }
  return 2.0 * (logits - y.value);
}

Eigen::VectorXd grad(const DenseReluNetwork& net, const Eigen::VectorXd& x, const Target& y) {
  const ForwardTrace t = forward_trace(net, x);
  Eigen::VectorXd g = loss_gradient(net.loss(), t.pre.back(), y);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(net.num_params());
  for (int k = net.num_layers() - 1; k >= 0; --k) {
    const Eigen::VectorXd& z_prev = t.post[k];
    if (net.trainable()[k]) {
      Eigen::Index p = net.weight_offset(k);
      for (Eigen::Index i = 0; i < g.size(); ++i) {
        for (Eigen::Index j = 0; j < z_prev.size(); ++j) out[p++] = g[i] * z_prev[j];
      }
      out.segment(net.bias_offset(k), g.size()) = g;
    }
    if (k == 0) break;
    const Eigen::MatrixXd& w = net.weight(k);
    Eigen::VectorXd dz(w.cols());
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < w.rows(); ++i) s += w(i, j) * g[i];
      dz[j] = s;
    }
    const Eigen::VectorXd& pre = t.pre[k - 1];
    for (Eigen::Index j = 0; j < dz.size(); ++j) dz[j] = pre[j] > 0.0 ? dz[j] : 0.0;
    g = std::move(dz);
  }
  return out;
}

Eigen::VectorXd clip(const Eigen::VectorXd& g, double kappa) {
  if (!(kappa >= 0.0)) throw InvalidInput("clip: kappa must be >= 0");
  return g.unaryExpr([kappa](double v) { return std::clamp(v, -kappa, kappa); });
}

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidInput("epochs must be >= 1");
  if (batch_size < 1) throw InvalidInput("batch size must be >= 1");
  if (!(lr > 0.0)) throw InvalidInput("learning rate must be > 0");
  if (!(lr_decay >= 0.0)) throw InvalidInput("learning rate decay must be >= 0");
  if (clip && !(*clip > 0.0)) throw InvalidInput("clipping level must be > 0");
  if (poisonable_fraction && !(*poisonable_fraction > 0.0 && *poisonable_fraction < 1.0)) {
    throw InvalidInput("poisonable_fraction must lie in (0, 1)");
  }
}

std::vector<std::vector<std::size_t>> batch_schedule(const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t n = static_cast<std::size_t>(data.size());
  if (n == 0) throw InvalidInput("empty dataset");
  const std::size_t b = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t batches_per_epoch = (n + b - 1) / b;

  std::vector<std::vector<std::size_t>> schedule;
  std::mt19937_64 rng(cfg.seed);
  if (!cfg.poisonable_fraction) {
    std::vector<std::size_t> order(n);
    for (int e = 0; e < cfg.epochs; ++e) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t s = 0; s < n; s += b) {
        schedule.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s),
                              order.begin() + static_cast<std::ptrdiff_t>(std::min(n, s + b)));
      }
    }
    return schedule;
  }

  // Fixed interleave: each batch draws its share from the poisonable pool and
  // the rest from the clean pool, cycling through each shuffled pool.
  std::vector<std::size_t> dirty, clean;
  for (std::size_t i = 0; i < n; ++i) (data.is_poisonable(static_cast<Eigen::Index>(i)) ? dirty : clean).push_back(i);
  if (dirty.empty() || clean.empty()) throw InvalidInput("poisonable_fraction needs both clean and poisonable samples");
  const std::size_t k_dirty = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(*cfg.poisonable_fraction * b)));
  const std::size_t k_clean = b > k_dirty ? b - k_dirty : 0;
  std::size_t pd = dirty.size(), pc = clean.size();
  auto draw = [&rng](std::vector<std::size_t>& pool, std::size_t& pos) {
    if (pos >= pool.size()) {
      std::shuffle(pool.begin(), pool.end(), rng);
      pos = 0;
    }
    return pool[pos++];
  };
  for (int e = 0; e < cfg.epochs; ++e) {
    for (std::size_t s = 0; s < batches_per_epoch; ++s) {
      std::vector<std::size_t> batch;
      for (std::size_t r = 0; r < k_dirty; ++r) batch.push_back(draw(dirty, pd));
      for (std::size_t r = 0; r < k_clean; ++r) batch.push_back(draw(clean, pc));
      schedule.push_back(std::move(batch));
    }
  }
  return schedule;
}

double sgd_step(DenseReluNetwork& net, const Dataset& batch, double lr, std::optional<double> clip_level) {
  const Eigen::Index b = batch.size();
  if (b == 0) throw InvalidInput("sgd_step: empty batch");
  std::vector<Eigen::VectorXd> grads(static_cast<std::size_t>(b));
  std::vector<double> losses(static_cast<std::size_t>(b));
#pragma omp parallel for schedule(static) if (b >= 16)
  for (Eigen::Index i = 0; i < b; ++i) {
    const Eigen::VectorXd x = batch.x(i);
    const Target y = batch.target(i);
    losses[i] = loss_value(net.loss(), forward(net, x), y);
    Eigen::VectorXd g = grad(net, x, y);
    grads[i] = clip_level ? clip(g, *clip_level) : std::move(g);
  }
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(net.num_params());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    sum += grads[i];
    loss += losses[i];
  }
  const Eigen::VectorXd step = sum / static_cast<double>(b);
  net.set_flat(net.flat() - lr * step);
  return loss / static_cast<double>(b);
}

SgdResult sgd_train(DenseReluNetwork net, const Dataset& data, const TrainConfig& cfg) {
  const auto schedule = batch_schedule(data, cfg);
  SgdResult r;
  long step = 0;
  for (const auto& idx : schedule) {
    const Dataset batch = data.subset(idx);
    r.step_loss.push_back(sgd_step(net, batch, cfg.learning_rate(step), cfg.clip));
    ++step;
  }
  r.net = std::move(net);
  return r;
}

double mean_loss(const DenseReluNetwork& net, const Dataset& data) {
  if (data.size() == 0) throw InvalidInput("mean_loss: empty dataset");
  double s = 0.0;
  for (Eigen::Index i = 0; i < data.size(); ++i) s += loss_value(net.loss(), forward(net, data.x(i)), data.target(i));
  return s / static_cast<double>(data.size());
}

int argmax(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  v.maxCoeff(&best);
  return static_cast<int>(best);
}

double accuracy(const DenseReluNetwork& net, const Dataset& data) {
  if (data.task != Task::Classification) throw InvalidInput("accuracy: classification only");
  if (data.size() == 0) throw InvalidInput("accuracy: empty dataset");
  long hits = 0;
  for (Eigen::Index i = 0; i < data.size(); ++i) hits += argmax(forward(net, data.x(i))) == data.classes[i];
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace agt
