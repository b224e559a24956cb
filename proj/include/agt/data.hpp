#pragma once

// Dataset sources: synthetic halfmoons, numeric CSV regression tables, IDX
// image/label files (raw or gzip), and PCA projection.

#include "agt/dataset.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace agt {

/// Two interleaved half circles of radius 1, seeded. Class 0 is the upper
/// circle centred at the origin, class 1 the lower one centred at (1, 0.5).
Dataset gen_halfmoons(int n, double noise, std::uint64_t seed);

struct CsvOptions {
  std::vector<std::string> label_columns;  // by header name; all other columns are features
  bool normalize = true;                   // min-max scale features and labels to [0, 1]
  std::optional<std::size_t> row_limit;    // keep only the first rows
};

/// Regression dataset from a comma-separated numeric table with a header row.
Dataset load_csv_regression(const std::string& path, const CsvOptions& opts);

/// Classification dataset from IDX files (magic 0x803 images, 0x801 labels).
/// Files may be gzip compressed. Pixels are scaled to [0, 1].
Dataset load_idx_images(const std::string& path_images, const std::string& path_labels);

/// Writers for the same format; `compress` selects gzip.
void write_idx_images(const std::string& path, const std::vector<std::uint8_t>& pixels, std::uint32_t count,
                      std::uint32_t rows, std::uint32_t cols, bool compress);
void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels, bool compress);

struct Pca {
  Eigen::VectorXd mean;                // n_in
  Eigen::MatrixXd components;          // k x n_in, orthonormal rows
  Eigen::VectorXd explained_variance;  // k, nonincreasing

  RowMatrix project(const RowMatrix& features) const;
  RowMatrix reconstruct(const RowMatrix& projected) const;
};

/// Top-k principal components from the covariance eigendecomposition.
Pca pca_fit(const RowMatrix& features, int k);
/// Copy of the dataset with projected features.
Dataset pca_project(const Dataset& data, const Pca& pca);

/// Writes a dataset as CSV: features x0..x{d-1}, then `label` or y0..y{k-1}.
void write_dataset_csv(const std::string& path, const Dataset& data);
/// Reads what write_dataset_csv wrote.
Dataset read_dataset_csv(const std::string& path);

}  // namespace agt
