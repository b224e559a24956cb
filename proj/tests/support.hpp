#pragma once

// Shared test helpers: random networks, boxes and samples inside them.

#include "agt/bound_prop.hpp"
#include "agt/network.hpp"

#include <random>
#include <vector>

namespace agt::test {

inline std::mt19937_64 rng_for(std::uint64_t seed) { return std::mt19937_64(seed); }

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Eigen::VectorXd uniform_vector(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  return Eigen::VectorXd::NullaryExpr(n, [&]() { return uniform(rng, lo, hi); });
}

inline Eigen::MatrixXd uniform_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double lo, double hi) {
  return Eigen::MatrixXd::NullaryExpr(r, c, [&]() { return uniform(rng, lo, hi); });
}

/// Random network with weights in [-1, 1] and biases in [-0.5, 0.5].
inline DenseReluNetwork random_net(std::mt19937_64& rng, const std::vector<int>& dims, LossKind loss) {
  std::vector<Eigen::MatrixXd> w;
  std::vector<Eigen::VectorXd> b;
  for (std::size_t k = 1; k < dims.size(); ++k) {
    w.push_back(uniform_matrix(rng, dims[k], dims[k - 1], -1.0, 1.0));
    b.push_back(uniform_vector(rng, dims[k], -0.5, 0.5));
  }
  return DenseReluNetwork(w, b, loss);
}

/// Box around the network with per-parameter radii up to rel * (|theta| + 0.1), asymmetric.
inline ParamBox random_box(std::mt19937_64& rng, const DenseReluNetwork& net, double rel) {
  const Eigen::VectorXd t = net.flat();
  Eigen::VectorXd lo(t.size()), hi(t.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const double r = rel * (std::abs(t[i]) + 0.1);
    lo[i] = t[i] - uniform(rng, 0.0, r);
    hi[i] = t[i] + uniform(rng, 0.0, r);
  }
  return ParamBox(net, lo, hi);
}

/// A point of [lo, hi]: uniform, or an endpoint with probability 1/4 each.
inline double sample_between(std::mt19937_64& rng, double lo, double hi) {
  const int pick = std::uniform_int_distribution<int>(0, 3)(rng);
  if (pick == 0) return lo;
  if (pick == 1) return hi;
  return uniform(rng, lo, hi);
}

inline Eigen::VectorXd sample_in(std::mt19937_64& rng, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  Eigen::VectorXd v(lo.size());
  for (Eigen::Index i = 0; i < lo.size(); ++i) v[i] = sample_between(rng, lo[i], hi[i]);
  return v;
}

inline DenseReluNetwork sample_net(std::mt19937_64& rng, const ParamBox& box) {
  DenseReluNetwork n = box.nominal();
  n.set_flat(sample_in(rng, box.lo(), box.hi()));
  return n;
}

/// Relative containment slack for floating-point rounding in the bound computations.
inline bool inside(double v, double lo, double hi, double tol = 1e-9) {
  const double slack = tol * (1.0 + std::abs(v));
  return v >= lo - slack && v <= hi + slack;
}

inline bool inside(const Eigen::VectorXd& v, const IntervalVector& iv, double tol = 1e-9) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!inside(v[i], iv.lo()[i], iv.hi()[i], tol)) return false;
  }
  return true;
}

}  // namespace agt::test
