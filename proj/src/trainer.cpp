#include "agt/trainer.hpp"

#include "agt/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace agt {

void BoundedAdversary::validate() const {
  if (n < 0 || m < 0) throw InvalidInput("adversary budgets must be >= 0");
  if (!(epsilon >= 0.0) || !(nu >= 0.0)) throw InvalidInput("adversary radii must be >= 0");
  if (label_flip && nu != 0.0) throw InvalidInput("label flipping (q = 0) takes no label radius");
}

void UnboundedAdversary::validate() const {
  if (n < 0) throw InvalidInput("adversary budget must be >= 0");
}

Eigen::VectorXd semax(std::span<const Eigen::VectorXd> vectors, int count) { return kernels::semax(vectors, count); }
Eigen::VectorXd semin(std::span<const Eigen::VectorXd> vectors, int count) { return kernels::semin(vectors, count); }

namespace {

void check_samples(std::span<const GradBounds> samples, int batch_size) {
  if (batch_size < 1) throw InvalidInput("batch size must be >= 1");
  if (samples.size() != static_cast<std::size_t>(batch_size)) {
    throw InvalidInput("descent bounds: expected " + std::to_string(batch_size) + " samples, got " +
                       std::to_string(samples.size()));
  }
  const Eigen::Index d = samples[0].clean_lo.size();
  for (const auto& s : samples) {
    if (s.clean_lo.size() != d || s.clean_hi.size() != d || s.poisoned_lo.size() != d || s.poisoned_hi.size() != d) {
      throw InvalidInput("descent bounds: inconsistent gradient shapes");
    }
  }
}

Eigen::VectorXd ordered_sum(std::span<const GradBounds> samples, Eigen::VectorXd GradBounds::*field) {
  Eigen::VectorXd s = Eigen::VectorXd::Zero((samples[0].*field).size());
  for (const auto& g : samples) s += g.*field;
  return s;
}

}  // namespace

DescentBounds descent_bounds_bounded(std::span<const GradBounds> samples, const BoundedAdversary& adv,
                                     int batch_size) {
  adv.validate();
  check_samples(samples, batch_size);
  const int a = std::min(adv.disjoint_sets ? adv.n + adv.m : std::max(adv.n, adv.m), batch_size);
  std::vector<Eigen::VectorXd> dlo, dhi;
  dlo.reserve(samples.size());
  dhi.reserve(samples.size());
  for (const auto& s : samples) {
    dlo.push_back(s.poisoned_lo - s.clean_lo);
    dhi.push_back(s.poisoned_hi - s.clean_hi);
  }
  const double b = static_cast<double>(batch_size);
  DescentBounds out;
  out.lo = (kernels::semin(dlo, a) + ordered_sum(samples, &GradBounds::clean_lo)) / b;
  out.hi = (kernels::semax(dhi, a) + ordered_sum(samples, &GradBounds::clean_hi)) / b;
  return out;
}

DescentBounds descent_bounds_unbounded(std::span<const GradBounds> samples, const UnboundedAdversary& adv,
                                       int batch_size, std::optional<double> kappa,
                                       std::span<const std::uint8_t> poisonable) {
  adv.validate();
  if (!kappa) throw InvalidInput("unbounded adversary requires gradient clipping (kappa unset)");
  if (!(*kappa > 0.0)) throw InvalidInput("clipping level must be > 0");
  check_samples(samples, batch_size);
  if (!poisonable.empty() && poisonable.size() != samples.size()) {
    throw InvalidInput("poisonable mask length does not match the batch");
  }
  const double k = *kappa;
  for (const auto& s : samples) {
    if (s.clean_lo.minCoeff() < -k || s.clean_hi.maxCoeff() > k) {
      throw InvalidInput("unbounded adversary: gradient bounds must be clipped to [-kappa, kappa]");
    }
  }
  // Sum over the kept samples minus n kappa, rewritten as the full in-order sum
  // plus the replacement slack of the replaced samples. With n = 0 this is the
  // same sum SGD computes, and the slack terms only move the bounds outward.
  std::vector<Eigen::VectorXd> slack_lo, slack_hi;
  const Eigen::Index d = samples[0].clean_lo.size();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (poisonable.empty() || poisonable[i]) {
      slack_lo.push_back(Eigen::VectorXd::Constant(d, -k) - samples[i].clean_lo);
      slack_hi.push_back(Eigen::VectorXd::Constant(d, k) - samples[i].clean_hi);
    }
  }
  const int replaced = std::min<int>(adv.n, static_cast<int>(slack_lo.size()));
  const double b = static_cast<double>(batch_size);
  DescentBounds out;
  if (replaced == 0) {
    out.lo = ordered_sum(samples, &GradBounds::clean_lo) / b;
    out.hi = ordered_sum(samples, &GradBounds::clean_hi) / b;
  } else if (replaced == static_cast<int>(slack_lo.size())) {
    // Every poisonable sample is replaced: only the fixed ones remain. The
    // in-order sum with each replaced term at -kappa (+kappa) bounds what SGD
    // computes under rounding; take the outer of it and the closed form.
    Eigen::VectorXd fixed_lo = Eigen::VectorXd::Zero(d), fixed_hi = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd seq_lo = Eigen::VectorXd::Zero(d), seq_hi = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (!poisonable.empty() && !poisonable[i]) {
        fixed_lo += samples[i].clean_lo;
        fixed_hi += samples[i].clean_hi;
        seq_lo += samples[i].clean_lo;
        seq_hi += samples[i].clean_hi;
      } else {
        seq_lo.array() -= k;
        seq_hi.array() += k;
      }
    }
    out.lo = ((fixed_lo - Eigen::VectorXd::Constant(d, replaced * k)) / b).cwiseMin(seq_lo / b);
    out.hi = ((fixed_hi + Eigen::VectorXd::Constant(d, replaced * k)) / b).cwiseMax(seq_hi / b);
  } else {
    out.lo = (ordered_sum(samples, &GradBounds::clean_lo) + kernels::semin(slack_lo, replaced)) / b;
    out.hi = (ordered_sum(samples, &GradBounds::clean_hi) + kernels::semax(slack_hi, replaced)) / b;
  }
  return out;
}

std::vector<GradBounds> batch_grad_bounds(const ParamBox& box, const Dataset& batch, const Adversary& adv,
                                          std::optional<double> clip_level, BoundMode mode,
                                          std::vector<Eigen::VectorXd>* nominal_grads) {
  const Eigen::Index b = batch.size();
  std::vector<GradBounds> out(static_cast<std::size_t>(b));
  std::vector<Eigen::VectorXd> grads(static_cast<std::size_t>(b));
  const auto* bounded = std::get_if<BoundedAdversary>(&adv);
  const DenseReluNetwork& net = box.nominal();

  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index i = 0; i < b; ++i) {
    try {
      const Eigen::VectorXd x = batch.x(i);
      const Target y = batch.target(i);
      double eps = 0.0;
      LabelBall ball;
      if (bounded && batch.is_poisonable(i)) {
        if (bounded->n > 0) eps = bounded->epsilon;
        if (bounded->m > 0) ball = LabelBall{bounded->nu, bounded->label_flip};
      }
      Eigen::VectorXd g = grad(net, x, y);
      const SampleGradBounds s = grad_bounds_sample(box, x, y, eps, ball, mode);
      // The nominal gradient is a member of both sets; adding it keeps the
      // enclosures exact in floating point for degenerate boxes.
      IntervalVector clean = hull(s.clean, g);
      IntervalVector poisoned = hull(s.poisoned, clean);
      if (clip_level) {
        g = clip(g, *clip_level);
        clean = iclip(clean, *clip_level);
        poisoned = iclip(poisoned, *clip_level);
      }
      grads[i] = std::move(g);
      out[i] = GradBounds{clean.lo(), clean.hi(), poisoned.lo(), poisoned.hi()};
    } catch (...) {
#pragma omp critical(agt_batch_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  if (nominal_grads) *nominal_grads = std::move(grads);
  return out;
}

namespace {

void validate_adversary(const Adversary& adv, const DenseReluNetwork& net, const TrainConfig& cfg) {
  if (const auto* a = std::get_if<BoundedAdversary>(&adv)) {
    a->validate();
    if (a->n > cfg.batch_size || a->m > cfg.batch_size) {
      throw InvalidInput("adversary budgets exceed the batch size");
    }
    if (a->m > 0 && a->label_flip && net.loss() != LossKind::CrossEntropy) {
      throw InvalidInput("label flipping needs a classification (cross entropy) model");
    }
    if (a->m > 0 && a->nu > 0.0 && net.loss() != LossKind::MeanSquaredError) {
      throw InvalidInput("a label radius needs a regression (MSE) model");
    }
  } else {
    const auto& u = std::get<UnboundedAdversary>(adv);
    u.validate();
    if (u.n > cfg.batch_size) throw InvalidInput("adversary budget exceeds the batch size");
    if (!cfg.clip) throw InvalidInput("unbounded adversary requires gradient clipping (kappa unset)");
  }
}

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

AgtResult agt_train(const DenseReluNetwork& init, const Dataset& data, const AgtConfig& cfg, const Adversary& adv) {
  cfg.train.validate();
  validate_adversary(adv, init, cfg.train);
  if (data.size() == 0) throw InvalidInput("empty dataset");
  data.validate();
  const auto schedule = batch_schedule(data, cfg.train);

  DenseReluNetwork net = init;
  Eigen::VectorXd theta = net.flat();
  Eigen::VectorXd lo = theta, hi = theta;
  ParamBox box(net);

  AgtResult r;
  if (cfg.record_trajectory) {
    r.trajectory_lo.push_back(lo);
    r.trajectory_hi.push_back(hi);
  }
  long step = 0;
  for (const auto& idx : schedule) {
    const Dataset batch = data.subset(idx);
    const double lr = cfg.train.learning_rate(step);
    std::vector<Eigen::VectorXd> grads;
    const int b = static_cast<int>(batch.size());
    DescentBounds db;
    // Inputs were validated above, so a rejected interval here means overflow.
    try {
      const auto bounds = batch_grad_bounds(box, batch, adv, cfg.train.clip, cfg.bound_mode, &grads);
      if (const auto* a = std::get_if<BoundedAdversary>(&adv)) {
        db = descent_bounds_bounded(bounds, *a, b);
      } else {
        db = descent_bounds_unbounded(bounds, std::get<UnboundedAdversary>(adv), b, cfg.train.clip,
                                      std::span<const std::uint8_t>(batch.poisonable));
      }
    } catch (const InvalidInput& e) {
      throw DivergenceError("step " + std::to_string(step) + ": " + e.what());
    }

    double loss = 0.0;
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
      loss += loss_value(net.loss(), forward(net, batch.x(i)), batch.target(i));
    }
    loss /= static_cast<double>(b);

    // Same arithmetic as sgd_step so the nominal trajectory matches plain SGD.
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(theta.size());
    for (const auto& g : grads) sum += g;
    const Eigen::VectorXd update = sum / static_cast<double>(b);
    theta = theta - lr * update;
    Eigen::VectorXd new_lo = lo - lr * db.hi;
    Eigen::VectorXd new_hi = hi - lr * db.lo;

    if (!all_finite(theta) || !all_finite(new_lo) || !all_finite(new_hi)) {
      throw DivergenceError("non-finite parameters or bounds at step " + std::to_string(step));
    }
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      if (!(new_lo[i] <= theta[i] && theta[i] <= new_hi[i])) {
        throw std::logic_error("nominal parameter " + std::to_string(i) + " left the box at step " +
                               std::to_string(step));
      }
    }
    lo = std::move(new_lo);
    hi = std::move(new_hi);
    net.set_flat(theta);
    box = ParamBox(net, lo, hi);

    const Eigen::VectorXd width = hi - lo;
    r.history.push_back(StepRecord{step, lr, loss, width.mean(), width.maxCoeff()});
    if (cfg.record_trajectory) {
      r.trajectory_lo.push_back(lo);
      r.trajectory_hi.push_back(hi);
    }
    ++step;
  }
  r.nominal = std::move(net);
  r.box = std::move(box);
  return r;
}

}  // namespace agt
