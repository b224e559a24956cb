#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace agt {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Task { Classification, Regression };

/// A single supervised label: a class index or a real vector.
struct Target {
  int class_index = -1;
  Eigen::VectorXd value;

  static Target of_class(int c) { return Target{c, {}}; }
  static Target of_value(Eigen::VectorXd v) { return Target{-1, std::move(v)}; }
  bool is_class() const { return class_index >= 0; }
};

/// Per-column min-max scaling to [0, 1]. Constant columns map to 0.
struct MinMaxScaler {
  Eigen::VectorXd min;
  Eigen::VectorXd range;  // 0 for constant columns

  static MinMaxScaler fit(const RowMatrix& m);
  RowMatrix transform(const RowMatrix& m) const;
  RowMatrix inverse(const RowMatrix& m) const;
};

struct Dataset {
  Task task = Task::Classification;
  RowMatrix features;          // N x n_in
  std::vector<int> classes;    // classification labels, length N
  int num_classes = 0;
  RowMatrix targets;           // regression labels, N x n_out
  std::vector<std::uint8_t> poisonable;  // 1 where the adversary may act

  std::optional<MinMaxScaler> feature_scaler;
  std::optional<MinMaxScaler> target_scaler;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index input_dim() const { return features.cols(); }
  int output_dim() const { return task == Task::Classification ? num_classes : static_cast<int>(targets.cols()); }

  Eigen::VectorXd x(Eigen::Index i) const { return features.row(i).transpose(); }
  Target target(Eigen::Index i) const;
  void set_target(Eigen::Index i, const Target& t);
  bool is_poisonable(Eigen::Index i) const { return poisonable.empty() || poisonable[i] != 0; }

  Dataset subset(std::span<const std::size_t> indices) const;
  /// Checks row counts, finiteness, label ranges and mask length; throws InvalidInput.
  void validate() const;
};

/// Deterministic train/test split after a seeded shuffle.
std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction, std::uint64_t seed);

}  // namespace agt
