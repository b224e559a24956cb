#include "agt/bound_prop.hpp"

#include <algorithm>
#include <cmath>

namespace agt {

// ---------------------------------------------------------------------------
// ParamBox

ParamBox::ParamBox(const DenseReluNetwork& nominal) : nominal_(nominal) {
  for (int k = 0; k < nominal_.num_layers(); ++k) {
    weights_.push_back(IntervalMatrix::point(nominal_.weight(k)));
    biases_.push_back(IntervalVector::point(nominal_.bias(k)));
  }
}

ParamBox::ParamBox(DenseReluNetwork nominal, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi)
    : nominal_(std::move(nominal)) {
  const Eigen::Index d = nominal_.num_params();
  if (lo.size() != d || hi.size() != d) throw InvalidInput("ParamBox: bound vectors do not match the network");
  const Eigen::VectorXd theta = nominal_.flat();
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!(lo[i] <= theta[i] && theta[i] <= hi[i])) {
      throw InvalidInput("ParamBox: nominal parameter " + std::to_string(i) + " lies outside its interval");
    }
  }
  DenseReluNetwork lo_net = nominal_, hi_net = nominal_;
  lo_net.set_flat(lo);
  hi_net.set_flat(hi);
  for (int k = 0; k < nominal_.num_layers(); ++k) {
    weights_.emplace_back(lo_net.weight(k), hi_net.weight(k));
    biases_.emplace_back(lo_net.bias(k), hi_net.bias(k));
  }
}

Eigen::VectorXd ParamBox::lo() const {
  DenseReluNetwork n = nominal_;
  for (int k = 0; k < num_layers(); ++k) {
    n.weight(k) = weights_[k].lo();
    n.bias(k) = biases_[k].lo();
  }
  return n.flat();
}

Eigen::VectorXd ParamBox::hi() const {
  DenseReluNetwork n = nominal_;
  for (int k = 0; k < num_layers(); ++k) {
    n.weight(k) = weights_[k].hi();
    n.bias(k) = biases_[k].hi();
  }
  return n.flat();
}

bool ParamBox::contains(const Eigen::VectorXd& theta, double tol) const {
  return IntervalVector(lo(), hi()).contains(theta, tol);
}

ParamBox ParamBox::with_bounds(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) const {
  return ParamBox(nominal_, lo, hi);
}

// ---------------------------------------------------------------------------
// Relaxations

ActivationRelaxation ActivationRelaxation::relu(double l, double u) {
  ActivationRelaxation r;
  if (u <= 0.0) return r;  // inactive: 0 <= ReLU <= 0
  if (l >= 0.0) {          // active: identity
    r.alpha_l = r.alpha_u = 1.0;
    return r;
  }
  r.alpha_u = u / (u - l);
  r.beta_u = -l;
  r.alpha_l = (u >= -l) ? 1.0 : 0.0;
  return r;
}

std::string to_string(BoundMode m) {
  switch (m) {
    case BoundMode::Ibp: return "ibp";
    case BoundMode::Crown: return "crown";
    case BoundMode::Tightest: return "tightest";
  }
  return "tightest";
}

BoundMode bound_mode_from_string(const std::string& s) {
  if (s == "ibp") return BoundMode::Ibp;
  if (s == "crown") return BoundMode::Crown;
  if (s == "tightest") return BoundMode::Tightest;
  throw InvalidInput("unknown bound mode '" + s + "'");
}

// ---------------------------------------------------------------------------
// Forward bounds

namespace {

void check_input(const ParamBox& box, const IntervalVector& x) {
  if (x.size() != box.nominal().input_dim()) {
    throw InvalidInput("input interval has " + std::to_string(x.size()) + " entries, network expects " +
                       std::to_string(box.nominal().input_dim()));
  }
}

IntervalVector affine(const ParamBox& box, int layer, const IntervalVector& z) {
  return iadd(imatvec(box.weight(layer), z), box.bias(layer));
}

// sum_i a_i * v_i with exact scalar interval products.
Interval idot(const IntervalMatrix& a, Eigen::Index row, const IntervalVector& v) {
  Interval s{0.0, 0.0};
  for (Eigen::Index i = 0; i < v.size(); ++i) s = s + a(row, i) * v[i];
  return s;
}

}  // namespace

LayerBounds ibp_forward(const ParamBox& box, const IntervalVector& x) {
  check_input(box, x);
  LayerBounds lb;
  lb.input = x;
  const int layers = box.num_layers();
  for (int k = 0; k < layers; ++k) {
    lb.pre.push_back(affine(box, k, lb.activation(k)));
    if (k + 1 < layers) lb.post.push_back(irelu(lb.pre.back()));
  }
  return lb;
}

CrownCoefficients crown_coefficients(const ParamBox& box, const LayerBounds& earlier, int target) {
  if (target < 1 || target > box.num_layers()) throw InvalidInput("crown: target layer out of range");
  if (static_cast<int>(earlier.pre.size()) < target - 1) {
    throw InvalidInput("crown: pre-activation bounds of earlier layers are missing");
  }
  const Eigen::Index n_t = box.weight(target - 1).rows();
  CrownCoefficients c;
  c.upper.resize(target + 1);
  c.lower.resize(target + 1);
  c.upper_offset.resize(target + 1);
  c.lower_offset.resize(target + 1);
  c.upper_concrete.resize(target);
  c.lower_concrete.resize(target);
  c.upper[target] = IntervalMatrix::identity(n_t);
  c.lower[target] = IntervalMatrix::identity(n_t);
  c.upper_offset[target] = Eigen::MatrixXd::Zero(n_t, n_t);
  c.lower_offset[target] = Eigen::MatrixXd::Zero(n_t, n_t);

  for (int k = target; k >= 1; --k) {
    const IntervalMatrix& w = box.weight(k - 1);
    const IntervalMatrix du = imatmul(c.upper[k], w);  // coefficients on z(k-1)
    const IntervalMatrix dl = imatmul(c.lower[k], w);
    if (k == 1) {
      c.upper[0] = du;
      c.lower[0] = dl;
      break;
    }
    const IntervalVector& bounds = earlier.pre[k - 2];  // zhat(k-1)
    const Eigen::Index n = w.cols();
    Eigen::MatrixXd ul = Eigen::MatrixXd::Zero(n_t, n), uh = Eigen::MatrixXd::Zero(n_t, n);
    Eigen::MatrixXd ll = Eigen::MatrixXd::Zero(n_t, n), lh = Eigen::MatrixXd::Zero(n_t, n);
    Eigen::MatrixXd ucl = Eigen::MatrixXd::Zero(n_t, n), uch = Eigen::MatrixXd::Zero(n_t, n);
    Eigen::MatrixXd lcl = Eigen::MatrixXd::Zero(n_t, n), lch = Eigen::MatrixXd::Zero(n_t, n);
    Eigen::MatrixXd uoff = Eigen::MatrixXd::Zero(n, n_t), loff = Eigen::MatrixXd::Zero(n, n_t);
    for (Eigen::Index i = 0; i < n; ++i) {
      const ActivationRelaxation r = ActivationRelaxation::relu(bounds.lo()[i], bounds.hi()[i]);
      for (Eigen::Index j = 0; j < n_t; ++j) {
        const Interval a = du(j, i);
        if (a.lo >= 0.0) {
          ul(j, i) = a.lo * r.alpha_u;
          uh(j, i) = a.hi * r.alpha_u;
          uoff(i, j) = r.beta_u;
        } else if (a.hi <= 0.0) {
          ul(j, i) = a.lo * r.alpha_l;
          uh(j, i) = a.hi * r.alpha_l;
          uoff(i, j) = r.beta_l;
        } else {
          ucl(j, i) = a.lo;
          uch(j, i) = a.hi;
        }
        const Interval b = dl(j, i);
        if (b.lo >= 0.0) {
          ll(j, i) = b.lo * r.alpha_l;
          lh(j, i) = b.hi * r.alpha_l;
          loff(i, j) = r.beta_l;
        } else if (b.hi <= 0.0) {
          ll(j, i) = b.lo * r.alpha_u;
          lh(j, i) = b.hi * r.alpha_u;
          loff(i, j) = r.beta_u;
        } else {
          lcl(j, i) = b.lo;
          lch(j, i) = b.hi;
        }
      }
    }
    c.upper[k - 1] = IntervalMatrix(std::move(ul), std::move(uh));
    c.lower[k - 1] = IntervalMatrix(std::move(ll), std::move(lh));
    c.upper_offset[k - 1] = std::move(uoff);
    c.lower_offset[k - 1] = std::move(loff);
    c.upper_concrete[k - 1] = IntervalMatrix(std::move(ucl), std::move(uch));
    c.lower_concrete[k - 1] = IntervalMatrix(std::move(lcl), std::move(lch));
  }
  return c;
}

IntervalVector crown_bounds(const ParamBox& box, const LayerBounds& earlier, int target,
                            const CrownCoefficients& c) {
  const Eigen::Index n_t = box.weight(target - 1).rows();
  Eigen::VectorXd lo(n_t), hi(n_t);
  std::vector<IntervalVector> relu_bounds;
  for (int k = 1; k < target; ++k) relu_bounds.push_back(irelu(earlier.pre[k - 1]));

#pragma omp parallel for schedule(static) if (n_t >= 8)
  for (Eigen::Index j = 0; j < n_t; ++j) {
    Interval up = idot(c.upper[0], j, earlier.input);
    Interval down = idot(c.lower[0], j, earlier.input);
    for (int k = 1; k <= target; ++k) {
      const IntervalVector& b = box.bias(k - 1);
      Interval su{0.0, 0.0}, sl{0.0, 0.0};
      for (Eigen::Index i = 0; i < b.size(); ++i) {
        su = su + c.upper[k](j, i) * Interval{b.lo()[i] + c.upper_offset[k](i, j), b.hi()[i] + c.upper_offset[k](i, j)};
        sl = sl + c.lower[k](j, i) * Interval{b.lo()[i] + c.lower_offset[k](i, j), b.hi()[i] + c.lower_offset[k](i, j)};
      }
      up = up + su;
      down = down + sl;
      if (k < target) {
        up = up + idot(c.upper_concrete[k], j, relu_bounds[k - 1]);
        down = down + idot(c.lower_concrete[k], j, relu_bounds[k - 1]);
      }
    }
    lo[j] = down.lo;
    hi[j] = up.hi;
  }
  // Rounding can cross the two sides for degenerate boxes.
  for (Eigen::Index j = 0; j < n_t; ++j) {
    if (lo[j] > hi[j]) std::swap(lo[j], hi[j]);
  }
  return IntervalVector(std::move(lo), std::move(hi));
}

namespace {

IntervalVector crown_layer(const ParamBox& box, const LayerBounds& earlier, int target) {
  return crown_bounds(box, earlier, target, crown_coefficients(box, earlier, target));
}

}  // namespace

LayerBounds crown_forward(const ParamBox& box, const IntervalVector& x) {
  check_input(box, x);
  LayerBounds lb;
  lb.input = x;
  const int layers = box.num_layers();
  lb.pre.push_back(affine(box, 0, x));
  if (layers > 1) lb.post.push_back(irelu(lb.pre.back()));
  for (int t = 2; t <= layers; ++t) {
    lb.pre.push_back(crown_layer(box, lb, t));
    if (t < layers) lb.post.push_back(irelu(lb.pre.back()));
  }
  return lb;
}

LayerBounds tightest_forward(const ParamBox& box, const IntervalVector& x) {
  check_input(box, x);
  const LayerBounds ibp = ibp_forward(box, x);
  const LayerBounds crown = crown_forward(box, x);
  LayerBounds lb;
  lb.input = x;
  const int layers = box.num_layers();
  lb.pre.push_back(intersect(ibp.pre[0], crown.pre[0]));
  if (layers > 1) lb.post.push_back(irelu(lb.pre.back()));
  for (int t = 2; t <= layers; ++t) {
    const IntervalVector ibp_step = affine(box, t - 1, lb.post.back());
    const IntervalVector crown_step = crown_layer(box, lb, t);
    lb.pre.push_back(intersect(intersect(intersect(ibp_step, crown_step), crown.pre[t - 1]), ibp.pre[t - 1]));
    if (t < layers) lb.post.push_back(irelu(lb.pre.back()));
  }
  return lb;
}

LayerBounds forward_bounds(const ParamBox& box, const IntervalVector& x, BoundMode mode) {
  switch (mode) {
    case BoundMode::Ibp: return ibp_forward(box, x);
    case BoundMode::Crown: return crown_forward(box, x);
    case BoundMode::Tightest: return tightest_forward(box, x);
  }
  return tightest_forward(box, x);
}

// ---------------------------------------------------------------------------
// Loss bounds

LossBounds loss_grad_bounds_mse(const IntervalVector& logits, const Eigen::VectorXd& y, double nu) {
  if (!(nu >= 0.0)) throw InvalidInput("label radius must be >= 0");
  if (y.size() != logits.size()) throw InvalidInput("regression target length does not match the logits");
  const Eigen::Index n = logits.size();
  Eigen::VectorXd glo(n), ghi(n);
  Interval loss{0.0, 0.0};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double dl = logits.lo()[i] - y[i];
    const double du = logits.hi()[i] - y[i];
    glo[i] = 2.0 * (dl - nu);
    ghi[i] = 2.0 * (du + nu);
    const double sl = dl * dl, su = du * du;
    loss.hi += std::max(sl, su);
    loss.lo += (dl <= 0.0 && du >= 0.0) ? 0.0 : std::min(sl, su);
  }
  return {IntervalVector(std::move(glo), std::move(ghi)), loss};
}

LossBounds loss_grad_bounds_ce(const IntervalVector& logits, int label, bool flip) {
  const Eigen::Index n = logits.size();
  if (label < 0 || label >= n) throw InvalidInput("class label outside the logit range");
  const Eigen::VectorXd& l = logits.lo();
  const Eigen::VectorXd& u = logits.hi();
  Eigen::VectorXd plo(n), phi(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s_lo = 0.0, s_hi = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      s_lo += (j == i) ? 1.0 : std::exp(u[j] - l[i]);
      s_hi += (j == i) ? 1.0 : std::exp(l[j] - u[i]);
    }
    plo[i] = 1.0 / s_lo;
    phi[i] = 1.0 / s_hi;
  }
  Eigen::VectorXd glo = plo, ghi = phi;
  if (flip) {
    glo.array() -= 1.0;
  } else {
    glo[label] -= 1.0;
    ghi[label] -= 1.0;
  }
  // -log p_y = log sum_j exp(z_j - z_y), evaluated with a max shift.
  auto lse = [&](const Eigen::VectorXd& num, double den) {
    double m = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != label) m = std::max(m, num[j] - den);
    }
    double s = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) s += std::exp(((j == label) ? 0.0 : num[j] - den) - m);
    return m + std::log(s);
  };
  const Interval loss{lse(l, u[label]), lse(u, l[label])};
  return {IntervalVector(std::move(glo), std::move(ghi)), loss};
}

LossBounds loss_bounds(LossKind loss, const IntervalVector& logits, const Target& y, const LabelBall& ball) {
  if (loss == LossKind::CrossEntropy) {
    if (ball.nu != 0.0) throw InvalidInput("cross entropy supports label flipping only (q = 0), not a label radius");
    return loss_grad_bounds_ce(logits, y.class_index, ball.flip);
  }
  if (ball.flip) throw InvalidInput("label flipping is only defined for cross entropy");
  return loss_grad_bounds_mse(logits, y.value, ball.nu);
}

// ---------------------------------------------------------------------------
// Backward bounds

IntervalVector backward_bounds(const ParamBox& box, const LayerBounds& fwd, const IntervalVector& dloss_dlogits) {
  const DenseReluNetwork& net = box.nominal();
  const int layers = net.num_layers();
  if (static_cast<int>(fwd.pre.size()) != layers || dloss_dlogits.size() != net.output_dim()) {
    throw InvalidInput("backward_bounds: forward bounds or loss gradient do not match the network");
  }
  Eigen::VectorXd lo = Eigen::VectorXd::Zero(net.num_params());
  Eigen::VectorXd hi = Eigen::VectorXd::Zero(net.num_params());
  IntervalVector g = dloss_dlogits;
  for (int k = layers - 1; k >= 0; --k) {
    const IntervalVector& z = fwd.activation(k);
    if (net.trainable()[k]) {
      Eigen::Index p = net.weight_offset(k);
      for (Eigen::Index i = 0; i < g.size(); ++i) {
        for (Eigen::Index j = 0; j < z.size(); ++j) {
          const Interval v = g[i] * z[j];
          lo[p] = v.lo;
          hi[p] = v.hi;
          ++p;
        }
      }
      lo.segment(net.bias_offset(k), g.size()) = g.lo();
      hi.segment(net.bias_offset(k), g.size()) = g.hi();
    }
    if (k == 0) break;
    const IntervalVector dz = imatvec(itranspose(box.weight(k)), g);
    const IntervalVector& pre = fwd.pre[k - 1];
    Eigen::VectorXd gate_lo(pre.size()), gate_hi(pre.size());
    for (Eigen::Index j = 0; j < pre.size(); ++j) {
      gate_lo[j] = pre.lo()[j] > 0.0 ? 1.0 : 0.0;
      gate_hi[j] = pre.hi()[j] >= 0.0 ? 1.0 : 0.0;
    }
    g = ielemmul(IntervalVector(std::move(gate_lo), std::move(gate_hi)), dz);
  }
  return IntervalVector(std::move(lo), std::move(hi));
}

IntervalVector gradient_bounds(const ParamBox& box, const IntervalVector& x, const Target& y, const LabelBall& ball,
                               BoundMode mode) {
  const LayerBounds fwd = forward_bounds(box, x, mode);
  const LossBounds lb = loss_bounds(box.nominal().loss(), fwd.logits(), y, ball);
  return backward_bounds(box, fwd, lb.grad);
}

SampleGradBounds grad_bounds_sample(const ParamBox& box, const Eigen::VectorXd& x, const Target& y, double eps,
                                    const LabelBall& ball, BoundMode mode) {
  if (!(eps >= 0.0) || !(ball.nu >= 0.0)) throw InvalidInput("perturbation radii must be >= 0");
  SampleGradBounds s;
  s.clean = gradient_bounds(box, IntervalVector::point(x), y, LabelBall{}, mode);
  if (eps == 0.0 && ball.nu == 0.0 && !ball.flip) {
    s.poisoned = s.clean;
  } else {
    s.poisoned = hull(gradient_bounds(box, IntervalVector::ball(x, eps), y, ball, mode), s.clean);
  }
  return s;
}

}  // namespace agt
