#pragma once

// Elementwise interval enclosures of real vectors and matrices.
//
// Arithmetic is plain IEEE double without outward rounding; the enclosures are
// sound in real arithmetic. Non-finite endpoints are rejected at construction.

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace agt {

/// Thrown for any argument that violates an operation's preconditions.
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// A closed scalar interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  static Interval point(double v) { return {v, v}; }
  double width() const { return hi - lo; }
  bool contains(double v, double tol = 0.0) const { return v >= lo - tol && v <= hi + tol; }
};

Interval operator+(Interval a, Interval b);
Interval operator*(Interval a, Interval b);  // exact hull of the four endpoint products
Interval relu(Interval a);

class IntervalVector {
 public:
  IntervalVector() = default;
  explicit IntervalVector(Eigen::Index n) : lo_(Eigen::VectorXd::Zero(n)), hi_(Eigen::VectorXd::Zero(n)) {}
  IntervalVector(Eigen::VectorXd lo, Eigen::VectorXd hi);

  static IntervalVector point(const Eigen::VectorXd& v) { return IntervalVector(v, v); }
  /// The l-infinity ball of radius eps around centre.
  static IntervalVector ball(const Eigen::VectorXd& centre, double eps);

  Eigen::Index size() const { return lo_.size(); }
  const Eigen::VectorXd& lo() const { return lo_; }
  const Eigen::VectorXd& hi() const { return hi_; }
  Interval operator[](Eigen::Index i) const { return {lo_[i], hi_[i]}; }
  void set(Eigen::Index i, Interval v);

  Eigen::VectorXd mid() const { return 0.5 * (lo_ + hi_); }
  Eigen::VectorXd width() const { return hi_ - lo_; }
  bool contains(const Eigen::VectorXd& v, double tol = 0.0) const;
  bool contains(const IntervalVector& other, double tol = 0.0) const;

 private:
  Eigen::VectorXd lo_;
  Eigen::VectorXd hi_;
};

class IntervalMatrix {
 public:
  IntervalMatrix() = default;
  IntervalMatrix(Eigen::Index rows, Eigen::Index cols)
      : lo_(Eigen::MatrixXd::Zero(rows, cols)), hi_(Eigen::MatrixXd::Zero(rows, cols)) {}
  IntervalMatrix(Eigen::MatrixXd lo, Eigen::MatrixXd hi);

  static IntervalMatrix point(const Eigen::MatrixXd& m) { return IntervalMatrix(m, m); }
  static IntervalMatrix identity(Eigen::Index n);

  Eigen::Index rows() const { return lo_.rows(); }
  Eigen::Index cols() const { return lo_.cols(); }
  const Eigen::MatrixXd& lo() const { return lo_; }
  const Eigen::MatrixXd& hi() const { return hi_; }
  Interval operator()(Eigen::Index i, Eigen::Index j) const { return {lo_(i, j), hi_(i, j)}; }
  void set(Eigen::Index i, Eigen::Index j, Interval v);

  Eigen::MatrixXd mid() const { return 0.5 * (hi_ + lo_); }
  Eigen::MatrixXd rad() const { return 0.5 * (hi_ - lo_); }
  Eigen::MatrixXd width() const { return hi_ - lo_; }
  bool contains(const Eigen::MatrixXd& m, double tol = 0.0) const;
  bool contains(const IntervalMatrix& other, double tol = 0.0) const;

  IntervalVector row(Eigen::Index i) const;

 private:
  Eigen::MatrixXd lo_;
  Eigen::MatrixXd hi_;
};

IntervalMatrix iadd(const IntervalMatrix& a, const IntervalMatrix& b);
IntervalVector iadd(const IntervalVector& a, const IntervalVector& b);

/// Rump's midpoint-radius product. Sound for every A in a and B in b.
IntervalMatrix imatmul(const IntervalMatrix& a, const IntervalMatrix& b);
/// Per-entry exact hull of the interval matrix-vector product.
IntervalVector imatvec(const IntervalMatrix& a, const IntervalVector& x);

IntervalMatrix ielemmul(const IntervalMatrix& a, const IntervalMatrix& b);
IntervalVector ielemmul(const IntervalVector& a, const IntervalVector& b);

/// Entry (i, j) is a[i] * b[j], computed as an exact scalar interval product.
IntervalMatrix iouter(const IntervalVector& a, const IntervalVector& b);

IntervalMatrix itranspose(const IntervalMatrix& a);
IntervalMatrix iscale(const IntervalMatrix& a, double alpha);
IntervalVector iscale(const IntervalVector& a, double alpha);

/// Image of the elementwise clamp to [-kappa, kappa].
IntervalMatrix iclip(const IntervalMatrix& a, double kappa);
IntervalVector iclip(const IntervalVector& a, double kappa);

IntervalVector irelu(const IntervalVector& a);

/// Elementwise intersection of two enclosures of the same quantity. Where the
/// endpoints cross by rounding noise, the narrower input is kept for that entry.
IntervalVector intersect(const IntervalVector& a, const IntervalVector& b);
IntervalVector hull(const IntervalVector& a, const IntervalVector& b);
IntervalVector hull(const IntervalVector& a, const Eigen::VectorXd& v);

}  // namespace agt
