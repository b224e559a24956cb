#include "agt/interval.hpp"

#include "agt/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace agt {

namespace {

template <typename Derived>
void validate(const Eigen::MatrixBase<Derived>& lo, const Eigen::MatrixBase<Derived>& hi, const char* what) {
  if (lo.rows() != hi.rows() || lo.cols() != hi.cols()) {
    throw InvalidInput(std::string(what) + ": endpoint shapes differ");
  }
  for (Eigen::Index j = 0; j < lo.cols(); ++j) {
    for (Eigen::Index i = 0; i < lo.rows(); ++i) {
      const double l = lo(i, j);
      const double h = hi(i, j);
      if (!std::isfinite(l) || !std::isfinite(h)) {
        throw InvalidInput(std::string(what) + ": non-finite endpoint at (" + std::to_string(i) + ", " +
                           std::to_string(j) + ")");
      }
      if (l > h) {
        throw InvalidInput(std::string(what) + ": lo > hi at (" + std::to_string(i) + ", " + std::to_string(j) +
                           ")");
      }
    }
  }
}

void require_same_shape(Eigen::Index r1, Eigen::Index c1, Eigen::Index r2, Eigen::Index c2, const char* op) {
  if (r1 != r2 || c1 != c2) {
    throw InvalidInput(std::string(op) + ": shape (" + std::to_string(r1) + "x" + std::to_string(c1) + ") vs (" +
                       std::to_string(r2) + "x" + std::to_string(c2) + ")");
  }
}

double clamp(double v, double k) { return std::clamp(v, -k, k); }

}  // namespace

Interval operator+(Interval a, Interval b) { return {a.lo + b.lo, a.hi + b.hi}; }

Interval operator*(Interval a, Interval b) {
  const double p1 = a.lo * b.lo;
  const double p2 = a.lo * b.hi;
  const double p3 = a.hi * b.lo;
  const double p4 = a.hi * b.hi;
  return {std::min({p1, p2, p3, p4}), std::max({p1, p2, p3, p4})};
}

Interval relu(Interval a) { return {std::max(a.lo, 0.0), std::max(a.hi, 0.0)}; }

IntervalVector::IntervalVector(Eigen::VectorXd lo, Eigen::VectorXd hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
  validate(lo_, hi_, "IntervalVector");
}

IntervalVector IntervalVector::ball(const Eigen::VectorXd& centre, double eps) {
  if (!(eps >= 0.0)) throw InvalidInput("IntervalVector::ball: negative radius");
  return IntervalVector(centre.array() - eps, centre.array() + eps);
}

void IntervalVector::set(Eigen::Index i, Interval v) {
  if (!(v.lo <= v.hi) || !std::isfinite(v.lo) || !std::isfinite(v.hi)) {
    throw InvalidInput("IntervalVector::set: invalid interval at " + std::to_string(i));
  }
  lo_[i] = v.lo;
  hi_[i] = v.hi;
}

bool IntervalVector::contains(const Eigen::VectorXd& v, double tol) const {
  if (v.size() != size()) return false;
  for (Eigen::Index i = 0; i < size(); ++i) {
    const double slack = tol * (1.0 + std::abs(v[i]));
    if (v[i] < lo_[i] - slack || v[i] > hi_[i] + slack) return false;
  }
  return true;
}

bool IntervalVector::contains(const IntervalVector& other, double tol) const {
  return contains(other.lo(), tol) && contains(other.hi(), tol);
}

IntervalMatrix::IntervalMatrix(Eigen::MatrixXd lo, Eigen::MatrixXd hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
  validate(lo_, hi_, "IntervalMatrix");
}

IntervalMatrix IntervalMatrix::identity(Eigen::Index n) { return point(Eigen::MatrixXd::Identity(n, n)); }

void IntervalMatrix::set(Eigen::Index i, Eigen::Index j, Interval v) {
  if (!(v.lo <= v.hi) || !std::isfinite(v.lo) || !std::isfinite(v.hi)) {
    throw InvalidInput("IntervalMatrix::set: invalid interval");
  }
  lo_(i, j) = v.lo;
  hi_(i, j) = v.hi;
}

bool IntervalMatrix::contains(const Eigen::MatrixXd& m, double tol) const {
  if (m.rows() != rows() || m.cols() != cols()) return false;
  for (Eigen::Index j = 0; j < cols(); ++j) {
    for (Eigen::Index i = 0; i < rows(); ++i) {
      const double slack = tol * (1.0 + std::abs(m(i, j)));
      if (m(i, j) < lo_(i, j) - slack || m(i, j) > hi_(i, j) + slack) return false;
    }
  }
  return true;
}

bool IntervalMatrix::contains(const IntervalMatrix& other, double tol) const {
  return contains(other.lo(), tol) && contains(other.hi(), tol);
}

IntervalVector IntervalMatrix::row(Eigen::Index i) const {
  return IntervalVector(lo_.row(i).transpose(), hi_.row(i).transpose());
}

IntervalMatrix iadd(const IntervalMatrix& a, const IntervalMatrix& b) {
  require_same_shape(a.rows(), a.cols(), b.rows(), b.cols(), "iadd");
  return IntervalMatrix(a.lo() + b.lo(), a.hi() + b.hi());
}

IntervalVector iadd(const IntervalVector& a, const IntervalVector& b) {
  require_same_shape(a.size(), 1, b.size(), 1, "iadd");
  return IntervalVector(a.lo() + b.lo(), a.hi() + b.hi());
}

IntervalMatrix imatmul(const IntervalMatrix& a, const IntervalMatrix& b) {
  if (a.cols() != b.rows()) {
    throw InvalidInput("imatmul: inner dimensions " + std::to_string(a.cols()) + " and " + std::to_string(b.rows()) +
                       " differ");
  }
  Eigen::MatrixXd lo, hi;
  kernels::rump_matmul(a.lo(), a.hi(), b.lo(), b.hi(), lo, hi);
  return IntervalMatrix(std::move(lo), std::move(hi));
}

IntervalVector imatvec(const IntervalMatrix& a, const IntervalVector& x) {
  if (a.cols() != x.size()) {
    throw InvalidInput("imatvec: matrix has " + std::to_string(a.cols()) + " columns, vector has " +
                       std::to_string(x.size()) + " entries");
  }
  Eigen::VectorXd lo, hi;
  kernels::interval_matvec(a.lo(), a.hi(), x.lo(), x.hi(), lo, hi);
  return IntervalVector(std::move(lo), std::move(hi));
}

IntervalMatrix ielemmul(const IntervalMatrix& a, const IntervalMatrix& b) {
  require_same_shape(a.rows(), a.cols(), b.rows(), b.cols(), "ielemmul");
  Eigen::MatrixXd lo(a.rows(), a.cols()), hi(a.rows(), a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const Interval p = a(i, j) * b(i, j);
      lo(i, j) = p.lo;
      hi(i, j) = p.hi;
    }
  }
  return IntervalMatrix(std::move(lo), std::move(hi));
}

IntervalVector ielemmul(const IntervalVector& a, const IntervalVector& b) {
  require_same_shape(a.size(), 1, b.size(), 1, "ielemmul");
  Eigen::VectorXd lo(a.size()), hi(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const Interval p = a[i] * b[i];
    lo[i] = p.lo;
    hi[i] = p.hi;
  }
  return IntervalVector(std::move(lo), std::move(hi));
}

IntervalMatrix iouter(const IntervalVector& a, const IntervalVector& b) {
  Eigen::MatrixXd lo(a.size(), b.size()), hi(a.size(), b.size());
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const Interval p = a[i] * b[j];
      lo(i, j) = p.lo;
      hi(i, j) = p.hi;
    }
  }
  return IntervalMatrix(std::move(lo), std::move(hi));
}

IntervalMatrix itranspose(const IntervalMatrix& a) { return IntervalMatrix(a.lo().transpose(), a.hi().transpose()); }

IntervalMatrix iscale(const IntervalMatrix& a, double alpha) {
  if (alpha >= 0.0) return IntervalMatrix(alpha * a.lo(), alpha * a.hi());
  return IntervalMatrix(alpha * a.hi(), alpha * a.lo());
}

IntervalVector iscale(const IntervalVector& a, double alpha) {
  if (alpha >= 0.0) return IntervalVector(alpha * a.lo(), alpha * a.hi());
  return IntervalVector(alpha * a.hi(), alpha * a.lo());
}

IntervalMatrix iclip(const IntervalMatrix& a, double kappa) {
  if (!(kappa >= 0.0)) throw InvalidInput("iclip: kappa must be >= 0");
  return IntervalMatrix(a.lo().unaryExpr([kappa](double v) { return clamp(v, kappa); }),
                        a.hi().unaryExpr([kappa](double v) { return clamp(v, kappa); }));
}

IntervalVector iclip(const IntervalVector& a, double kappa) {
  if (!(kappa >= 0.0)) throw InvalidInput("iclip: kappa must be >= 0");
  return IntervalVector(a.lo().unaryExpr([kappa](double v) { return clamp(v, kappa); }),
                        a.hi().unaryExpr([kappa](double v) { return clamp(v, kappa); }));
}

IntervalVector irelu(const IntervalVector& a) { return IntervalVector(a.lo().cwiseMax(0.0), a.hi().cwiseMax(0.0)); }

IntervalVector intersect(const IntervalVector& a, const IntervalVector& b) {
  require_same_shape(a.size(), 1, b.size(), 1, "intersect");
  Eigen::VectorXd lo = a.lo().cwiseMax(b.lo());
  Eigen::VectorXd hi = a.hi().cwiseMin(b.hi());
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (lo[i] <= hi[i]) continue;
    const bool take_a = a.hi()[i] - a.lo()[i] <= b.hi()[i] - b.lo()[i];
    lo[i] = take_a ? a.lo()[i] : b.lo()[i];
    hi[i] = take_a ? a.hi()[i] : b.hi()[i];
  }
  return IntervalVector(std::move(lo), std::move(hi));
}

IntervalVector hull(const IntervalVector& a, const IntervalVector& b) {
  require_same_shape(a.size(), 1, b.size(), 1, "hull");
  return IntervalVector(a.lo().cwiseMin(b.lo()), a.hi().cwiseMax(b.hi()));
}

IntervalVector hull(const IntervalVector& a, const Eigen::VectorXd& v) {
  require_same_shape(a.size(), 1, v.size(), 1, "hull");
  return IntervalVector(a.lo().cwiseMin(v), a.hi().cwiseMax(v));
}

}  // namespace agt
