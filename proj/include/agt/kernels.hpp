#pragma once

// Data-parallel inner loops. Each kernel in `agt::kernels` is an OpenMP
// version of the serial loop with the same name in `agt::reference`; the two
// compute every output entry with the same summation order, so their results
// are bitwise identical. The reference versions exist for tests and benchmarks.

#include <Eigen/Dense>

#include <span>

namespace agt {

namespace kernels {

/// Rump product: writes lo/hi of [a_lo, a_hi] x [b_lo, b_hi].
void rump_matmul(const Eigen::MatrixXd& a_lo, const Eigen::MatrixXd& a_hi, const Eigen::MatrixXd& b_lo,
                 const Eigen::MatrixXd& b_hi, Eigen::MatrixXd& c_lo, Eigen::MatrixXd& c_hi);

/// Real matrix-vector product using the summation order of rump_matmul.
Eigen::VectorXd matvec(const Eigen::MatrixXd& a, const Eigen::VectorXd& x);

/// Interval matrix times interval vector, each entry the sum of exact scalar
/// interval products (tighter than the midpoint-radius form for one column).
void interval_matvec(const Eigen::MatrixXd& a_lo, const Eigen::MatrixXd& a_hi, const Eigen::VectorXd& x_lo,
                     const Eigen::VectorXd& x_hi, Eigen::VectorXd& y_lo, Eigen::VectorXd& y_hi);

/// Per index i, the sum of the `count` largest values of vectors[.][i].
Eigen::VectorXd semax(std::span<const Eigen::VectorXd> vectors, int count);
/// Per index i, the sum of the `count` smallest values of vectors[.][i].
Eigen::VectorXd semin(std::span<const Eigen::VectorXd> vectors, int count);

}  // namespace kernels

namespace reference {

void rump_matmul(const Eigen::MatrixXd& a_lo, const Eigen::MatrixXd& a_hi, const Eigen::MatrixXd& b_lo,
                 const Eigen::MatrixXd& b_hi, Eigen::MatrixXd& c_lo, Eigen::MatrixXd& c_hi);
Eigen::VectorXd matvec(const Eigen::MatrixXd& a, const Eigen::VectorXd& x);
void interval_matvec(const Eigen::MatrixXd& a_lo, const Eigen::MatrixXd& a_hi, const Eigen::VectorXd& x_lo,
                     const Eigen::VectorXd& x_hi, Eigen::VectorXd& y_lo, Eigen::VectorXd& y_hi);

// Sort-based; kernels::semax uses partial selection.
Eigen::VectorXd semax(std::span<const Eigen::VectorXd> vectors, int count);
Eigen::VectorXd semin(std::span<const Eigen::VectorXd> vectors, int count);

}  // namespace reference

}  // namespace agt
