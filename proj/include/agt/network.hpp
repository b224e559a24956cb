#pragma once

// Dense ReLU networks: nominal forward pass, reverse-mode gradients, the two
// supported losses, and plain (optionally clipped) minibatch SGD.

#include "agt/dataset.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace agt {

enum class LossKind { MeanSquaredError, CrossEntropy };

std::string to_string(LossKind k);
LossKind loss_kind_from_string(const std::string& s);

/// Affine layers W(k) z + b(k) with ReLU after every layer except the last.
///
/// Flat parameter order: for each layer, W row-major followed by b.
class DenseReluNetwork {
 public:
  DenseReluNetwork() = default;
  /// Zero-initialised network with the given layer widths [n_in, n_1, ..., n_out].
  DenseReluNetwork(std::vector<int> layer_dims, LossKind loss);
  DenseReluNetwork(std::vector<Eigen::MatrixXd> weights, std::vector<Eigen::VectorXd> biases, LossKind loss);

  /// Seeded He-style uniform init: W ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)), b = 0.
  static DenseReluNetwork he_uniform(std::vector<int> layer_dims, LossKind loss, std::uint64_t seed);

  const std::vector<int>& layer_dims() const { return dims_; }
  int num_layers() const { return static_cast<int>(weights_.size()); }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  LossKind loss() const { return loss_; }

  const Eigen::MatrixXd& weight(int k) const { return weights_[k]; }
  const Eigen::VectorXd& bias(int k) const { return biases_[k]; }
  Eigen::MatrixXd& weight(int k) { return weights_[k]; }
  Eigen::VectorXd& bias(int k) { return biases_[k]; }

  /// Layers flagged false receive no updates. Defaults to all trainable.
  const std::vector<bool>& trainable() const { return trainable_; }
  void set_trainable(std::vector<bool> mask);

  Eigen::Index num_params() const;
  Eigen::VectorXd flat() const;
  void set_flat(const Eigen::VectorXd& theta);
  /// Flat index of the first weight and bias entry of layer k.
  Eigen::Index weight_offset(int k) const;
  Eigen::Index bias_offset(int k) const;

 private:
  std::vector<int> dims_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
  std::vector<bool> trainable_;
  LossKind loss_ = LossKind::CrossEntropy;
};

/// Pre- and post-activation values of every layer; post[0] is the input.
struct ForwardTrace {
  std::vector<Eigen::VectorXd> pre;   // pre[k-1] = W(k) z(k-1) + b(k), k = 1..K
  std::vector<Eigen::VectorXd> post;  // post[k] = z(k), k = 0..K-1
};

Eigen::VectorXd forward(const DenseReluNetwork& net, const Eigen::VectorXd& x);
ForwardTrace forward_trace(const DenseReluNetwork& net, const Eigen::VectorXd& x);

/// Softmax via p_i = 1 / sum_j exp(z_j - z_i), the form the interval bounds use.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

/// MSE is sum_k (z_k - y_k)^2; cross entropy is -log softmax(z)[y].
double loss_value(LossKind loss, const Eigen::VectorXd& logits, const Target& y);
/// Derivative of the loss with respect to the logits.
Eigen::VectorXd loss_gradient(LossKind loss, const Eigen::VectorXd& logits, const Target& y);

/// Exact reverse-mode gradient of the scalar loss as a flat parameter vector.
/// Frozen layers report zero gradient.
Eigen::VectorXd grad(const DenseReluNetwork& net, const Eigen::VectorXd& x, const Target& y);

/// Elementwise clamp to [-kappa, kappa].
Eigen::VectorXd clip(const Eigen::VectorXd& g, double kappa);

struct TrainConfig {
  int epochs = 1;
  int batch_size = 1;
  double lr = 0.1;
  double lr_decay = 0.0;           // alpha_n = lr / (1 + lr_decay * n), n = global step
  std::optional<double> clip;      // per-sample elementwise gradient clipping level
  std::uint64_t seed = 0;          // data-order shuffle
  std::optional<double> poisonable_fraction;  // fixed share of poisonable samples per batch

  void validate() const;
  double learning_rate(long step) const { return lr / (1.0 + lr_decay * static_cast<double>(step)); }
};

/// Index lists of every batch, epoch by epoch, in training order.
std::vector<std::vector<std::size_t>> batch_schedule(const Dataset& data, const TrainConfig& cfg);

/// One SGD update on the batch; returns the mean loss at the pre-update parameters.
double sgd_step(DenseReluNetwork& net, const Dataset& batch, double lr, std::optional<double> clip_level);

struct SgdResult {
  DenseReluNetwork net;
  std::vector<double> step_loss;
};

SgdResult sgd_train(DenseReluNetwork net, const Dataset& data, const TrainConfig& cfg);

double mean_loss(const DenseReluNetwork& net, const Dataset& data);
/// Fraction of samples whose argmax logit equals the label (classification only).
double accuracy(const DenseReluNetwork& net, const Dataset& data);
int argmax(const Eigen::VectorXd& v);

}  // namespace agt
