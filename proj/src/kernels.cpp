#include "agt/kernels.hpp"

#include "agt/interval.hpp"

#include <algorithm>
#include <functional>
#include <vector>

namespace agt {

namespace {

void check_rump_shapes(const Eigen::MatrixXd& a_lo, const Eigen::MatrixXd& a_hi, const Eigen::MatrixXd& b_lo,
                       const Eigen::MatrixXd& b_hi) {
  if (a_lo.rows() != a_hi.rows() || a_lo.cols() != a_hi.cols() || b_lo.rows() != b_hi.rows() ||
      b_lo.cols() != b_hi.cols()) {
    throw InvalidInput("rump_matmul: endpoint shapes differ");
  }
  if (a_lo.cols() != b_lo.rows()) {
    throw InvalidInput("rump_matmul: inner dimensions " + std::to_string(a_lo.cols()) + " and " +
                       std::to_string(b_lo.rows()) + " differ");
  }
}

struct MidRad {
  Eigen::MatrixXd mid, abs_mid, rad;
};

MidRad mid_rad(const Eigen::MatrixXd& lo, const Eigen::MatrixXd& hi) {
  MidRad m;
  m.mid = 0.5 * (hi + lo);
  m.rad = 0.5 * (hi - lo);
  m.abs_mid = m.mid.cwiseAbs();
  return m;
}

// One output entry. C = Amu Bmu -/+ (|Amu| Br + Ar |Bmu| + Ar Br).
inline void rump_entry(const MidRad& a, const MidRad& b, Eigen::Index i, Eigen::Index j, double& lo, double& hi) {
  double mu = 0.0;
  double rad = 0.0;
  for (Eigen::Index k = 0; k < a.mid.cols(); ++k) {
    mu += a.mid(i, k) * b.mid(k, j);
    rad += a.abs_mid(i, k) * b.rad(k, j) + a.rad(i, k) * b.abs_mid(k, j) + a.rad(i, k) * b.rad(k, j);
  }
  lo = mu - rad;
  hi = mu + rad;
}

// Exact hull of sum_k [a_lo, a_hi](i, k) * [x_lo, x_hi](k), summed in k order.
inline void hull_dot(const Eigen::MatrixXd& a_lo, const Eigen::MatrixXd& a_hi, const Eigen::VectorXd& x_lo,
                     const Eigen::VectorXd& x_hi, Eigen::Index i, double& lo, double& hi) {
  double l = 0.0, h = 0.0;
  for (Eigen::Index k = 0; k < a_lo.cols(); ++k) {
    const double p0 = a_lo(i, k) * x_lo[k], p1 = a_lo(i, k) * x_hi[k];
    const double p2 = a_hi(i, k) * x_lo[k], p3 = a_hi(i, k) * x_hi[k];
    l += std::min(std::min(p0, p1), std::min(p2, p3));
    h += std::max(std::max(p0, p1), std::max(p2, p3));
  }
  lo = l;
  hi = h;
}

void check_matvec_shapes(const Eigen::MatrixXd& a_lo, const Eigen::MatrixXd& a_hi, const Eigen::VectorXd& x_lo,
                         const Eigen::VectorXd& x_hi) {
  if (a_lo.rows() != a_hi.rows() || a_lo.cols() != a_hi.cols() || x_lo.size() != x_hi.size()) {
    throw InvalidInput("interval_matvec: endpoint shapes differ");
  }
  if (a_lo.cols() != x_lo.size()) throw InvalidInput("interval_matvec: dimension mismatch");
}

void check_semax(std::span<const Eigen::VectorXd> vectors, int count) {
  if (count < 0 || static_cast<std::size_t>(count) > vectors.size()) {
    throw InvalidInput("semax/semin: count " + std::to_string(count) + " outside [0, " +
                       std::to_string(vectors.size()) + "]");
  }
  for (const auto& v : vectors) {
    if (v.size() != vectors[0].size()) throw InvalidInput("semax/semin: vectors have different lengths");
  }
}

template <typename Compare>
double select_sum(std::vector<double>& column, int count, Compare cmp) {
  if (count == 0) return 0.0;
  if (static_cast<std::size_t>(count) < column.size()) {
    std::nth_element(column.begin(), column.begin() + (count - 1), column.end(), cmp);
  }
  // Sum in sorted order so the result does not depend on the selection algorithm.
  std::sort(column.begin(), column.begin() + count, cmp);
  double s = 0.0;
  for (int r = 0; r < count; ++r) s += column[r];
  return s;
}

template <typename Compare>
Eigen::VectorXd se_parallel(std::span<const Eigen::VectorXd> vectors, int count, Compare cmp) {
  check_semax(vectors, count);
  if (vectors.empty()) return {};
  const Eigen::Index d = vectors[0].size();
  Eigen::VectorXd out(d);
#pragma omp parallel
  {
    std::vector<double> column(vectors.size());
#pragma omp for schedule(static)
    for (Eigen::Index i = 0; i < d; ++i) {
      for (std::size_t s = 0; s < vectors.size(); ++s) column[s] = vectors[s][i];
      out[i] = select_sum(column, count, cmp);
    }
  }
  return out;
}

template <typename Compare>
Eigen::VectorXd se_serial(std::span<const Eigen::VectorXd> vectors, int count, Compare cmp) {
  check_semax(vectors, count);
  if (vectors.empty()) return {};
  const Eigen::Index d = vectors[0].size();
  Eigen::VectorXd out(d);
  std::vector<double> column(vectors.size());
  for (Eigen::Index i = 0; i < d; ++i) {
    for (std::size_t s = 0; s < vectors.size(); ++s) column[s] = vectors[s][i];
    std::sort(column.begin(), column.end(), cmp);
    double sum = 0.0;
    for (int r = 0; r < count; ++r) sum += column[r];
    out[i] = sum;
  }
  return out;
}

}  // namespace

namespace kernels {

void rump_matmul(const Eigen::MatrixXd& a_lo, const Eigen::MatrixXd& a_hi, const Eigen::MatrixXd& b_lo,
                 const Eigen::MatrixXd& b_hi, Eigen::MatrixXd& c_lo, Eigen::MatrixXd& c_hi) {
  check_rump_shapes(a_lo, a_hi, b_lo, b_hi);
  const MidRad a = mid_rad(a_lo, a_hi);
  const MidRad b = mid_rad(b_lo, b_hi);
  c_lo.resize(a_lo.rows(), b_lo.cols());
  c_hi.resize(a_lo.rows(), b_lo.cols());
  const Eigen::Index rows = c_lo.rows();
  const Eigen::Index cols = c_lo.cols();
#pragma omp parallel for collapse(2) schedule(static) if (rows * cols * a_lo.cols() > 4096)
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) rump_entry(a, b, i, j, c_lo(i, j), c_hi(i, j));
  }
}

Eigen::VectorXd matvec(const Eigen::MatrixXd& a, const Eigen::VectorXd& x) {
  if (a.cols() != x.size()) throw InvalidInput("matvec: dimension mismatch");
  Eigen::VectorXd y(a.rows());
#pragma omp parallel for schedule(static) if (a.size() > 4096)
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < a.cols(); ++k) s += a(i, k) * x[k];
    y[i] = s;
  }
  return y;
}

void interval_matvec(const Eigen::MatrixXd& a_lo, const Eigen::MatrixXd& a_hi, const Eigen::VectorXd& x_lo,
                     const Eigen::VectorXd& x_hi, Eigen::VectorXd& y_lo, Eigen::VectorXd& y_hi) {
  check_matvec_shapes(a_lo, a_hi, x_lo, x_hi);
  y_lo.resize(a_lo.rows());
  y_hi.resize(a_lo.rows());
#pragma omp parallel for schedule(static) if (a_lo.size() > 4096)
  for (Eigen::Index i = 0; i < a_lo.rows(); ++i) hull_dot(a_lo, a_hi, x_lo, x_hi, i, y_lo[i], y_hi[i]);
}

Eigen::VectorXd semax(std::span<const Eigen::VectorXd> vectors, int count) {
  return se_parallel(vectors, count, std::greater<double>());
}

Eigen::VectorXd semin(std::span<const Eigen::VectorXd> vectors, int count) {
  return se_parallel(vectors, count, std::less<double>());
}

}  // namespace kernels

namespace reference {

void rump_matmul(const Eigen::MatrixXd& a_lo, const Eigen::MatrixXd& a_hi, const Eigen::MatrixXd& b_lo,
                 const Eigen::MatrixXd& b_hi, Eigen::MatrixXd& c_lo, Eigen::MatrixXd& c_hi) {
  check_rump_shapes(a_lo, a_hi, b_lo, b_hi);
  const MidRad a = mid_rad(a_lo, a_hi);
  const MidRad b = mid_rad(b_lo, b_hi);
  c_lo.resize(a_lo.rows(), b_lo.cols());
  c_hi.resize(a_lo.rows(), b_lo.cols());
  for (Eigen::Index i = 0; i < c_lo.rows(); ++i) {
    for (Eigen::Index j = 0; j < c_lo.cols(); ++j) rump_entry(a, b, i, j, c_lo(i, j), c_hi(i, j));
  }
}

Eigen::VectorXd matvec(const Eigen::MatrixXd& a, const Eigen::VectorXd& x) {
  if (a.cols() != x.size()) throw InvalidInput("matvec: dimension mismatch");
  Eigen::VectorXd y(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < a.cols(); ++k) s += a(i, k) * x[k];
    y[i] = s;
  }
  return y;
}

void interval_matvec(const Eigen::MatrixXd& a_lo, const Eigen::MatrixXd& a_hi, const Eigen::VectorXd& x_lo,
                     const Eigen::VectorXd& x_hi, Eigen::VectorXd& y_lo, Eigen::VectorXd& y_hi) {
  check_matvec_shapes(a_lo, a_hi, x_lo, x_hi);
  y_lo.resize(a_lo.rows());
  y_hi.resize(a_lo.rows());
  for (Eigen::Index i = 0; i < a_lo.rows(); ++i) hull_dot(a_lo, a_hi, x_lo, x_hi, i, y_lo[i], y_hi[i]);
}

Eigen::VectorXd semax(std::span<const Eigen::VectorXd> vectors, int count) {
  return se_serial(vectors, count, std::greater<double>());
}

Eigen::VectorXd semin(std::span<const Eigen::VectorXd> vectors, int count) {
  return se_serial(vectors, count, std::less<double>());
}

}  // namespace reference

}  // namespace agt
