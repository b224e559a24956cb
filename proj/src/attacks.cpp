#include "agt/attacks.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <cmath>
#include <numeric>
#include <random>

namespace agt {

std::string to_string(AttackKind k) {
  switch (k) {
    case AttackKind::ParamTargetPgd: return "param_target_pgd";
    case AttackKind::FeatureCollision: return "feature_collision";
    case AttackKind::LabelFlip: return "label_flip";
  }
  return "unknown";
}

AttackKind attack_kind_from_string(const std::string& s) {
  if (s == "param_target_pgd" || s == "pgd") return AttackKind::ParamTargetPgd;
  if (s == "feature_collision") return AttackKind::FeatureCollision;
  if (s == "label_flip") return AttackKind::LabelFlip;
  throw InvalidInput("unknown attack kind '" + s + "'");
}

void AttackSpec::validate() const {
  if (n < 0 || m < 0) throw InvalidInput("attack budgets must be >= 0");
  if (!(epsilon >= 0.0)) throw InvalidInput("attack radius must be >= 0");
  if (pgd_steps < 0) throw InvalidInput("pgd_steps must be >= 0");
  if (step_size && !(*step_size >= 0.0)) throw InvalidInput("PGD step size must be >= 0");
}

namespace {

std::mt19937_64 seeded(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
  return std::mt19937_64(seq);
}

/// Up to k poisonable rows, sampled without replacement, ascending.
std::vector<std::size_t> pick_rows(const Dataset& batch, int k, std::mt19937_64& rng,
                                   const std::function<bool(Eigen::Index)>& eligible = {}) {
  std::vector<std::size_t> pool;
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    if (batch.is_poisonable(i) && (!eligible || eligible(i))) pool.push_back(static_cast<std::size_t>(i));
  }
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(std::min<std::size_t>(pool.size(), static_cast<std::size_t>(std::max(k, 0))));
  std::sort(pool.begin(), pool.end());
  return pool;
}

double pgd_objective(const DenseReluNetwork& net, const Eigen::VectorXd& direction, const Eigen::VectorXd& x,
                     const Target& y) {
  return direction.dot(grad(net, x, y));
}

}  // namespace

Dataset param_target_pgd_poison(const Dataset& batch, const DenseReluNetwork& net, const Eigen::VectorXd& direction,
                                const AttackSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (direction.size() != net.num_params()) throw InvalidInput("PGD direction has the wrong length");
  Dataset out = batch;
  const double eps = spec.epsilon;
  if (eps == 0.0 || spec.n == 0) return out;
  const double step = spec.step_size.value_or(eps / 10.0);
  auto rng = seeded(seed, 0x5067);
  const auto rows = pick_rows(batch, spec.n, rng);
  const double h = 1e-6;
  for (std::size_t r : rows) {
    const auto i = static_cast<Eigen::Index>(r);
    const Eigen::VectorXd x = batch.x(i);
    const Target y = batch.target(i);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(x.size());
    for (int s = 0; s < spec.pgd_steps; ++s) {
      Eigen::VectorXd g(x.size());
      for (Eigen::Index k = 0; k < x.size(); ++k) {
        Eigen::VectorXd xp = x + v, xm = x + v;
        xp[k] += h;
        xm[k] -= h;
        g[k] = (pgd_objective(net, direction, xp, y) - pgd_objective(net, direction, xm, y)) / (2.0 * h);
      }
      v = (v + step * g.cwiseSign()).cwiseMax(-eps).cwiseMin(eps);
    }
    out.features.row(i) = (x + v).transpose();
  }
  return out;
}

Dataset feature_collision_attack(const Dataset& batch, const Eigen::VectorXd& target, int n, std::uint64_t seed) {
  if (n < 0) throw InvalidInput("feature collision: n must be >= 0");
  if (n > batch.size()) throw InvalidInput("feature collision: n exceeds the batch size");
  if (target.size() != batch.input_dim()) throw InvalidInput("feature collision: target has the wrong dimension");
  Dataset out = batch;
  auto rng = seeded(seed, 0xC011);
  const auto rows = pick_rows(batch, n, rng);
  for (std::size_t r : rows) {
    const auto i = static_cast<Eigen::Index>(r);
    out.features.row(i) = target.transpose();
    if (batch.task == Task::Classification) {
      std::uniform_int_distribution<int> cls(0, batch.num_classes - 1);
      out.classes[r] = cls(rng);
    } else {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (Eigen::Index k = 0; k < out.targets.cols(); ++k) out.targets(i, k) = u(rng);
    }
  }
  return out;
}

Dataset flip_labels(const Dataset& batch, const std::vector<std::size_t>& rows, int to) {
  if (batch.task != Task::Classification) throw InvalidInput("label flipping needs class labels");
  if (to < 0 || to >= batch.num_classes) throw InvalidInput("flip target class out of range");
  Dataset out = batch;
  for (std::size_t r : rows) {
    if (r >= out.classes.size()) throw InvalidInput("flip row out of range");
    out.classes[r] = to;
  }
  return out;
}

LabelFlipResult label_flip_attack(const Dataset& batch, int m, int from, int to, std::uint64_t seed) {
  if (batch.task != Task::Classification) throw InvalidInput("label flipping needs class labels");
  if (m < 0) throw InvalidInput("label flip: m must be >= 0");
  if (from >= batch.num_classes || to >= batch.num_classes) throw InvalidInput("label flip: class out of range");
  if (batch.num_classes < 2) throw InvalidInput("label flip: need at least two classes");
  auto rng = seeded(seed, 0xF11B);
  const auto rows = pick_rows(batch, m, rng, [&](Eigen::Index i) {
    const int c = batch.classes[static_cast<std::size_t>(i)];
    return (from < 0 || c == from) && c != to;
  });
  LabelFlipResult res{batch, rows};
  for (std::size_t r : rows) {
    if (to >= 0) {
      res.batch.classes[r] = to;
    } else {
      // Uniform over the other classes.
      std::uniform_int_distribution<int> cls(0, batch.num_classes - 2);
      const int k = cls(rng);
      res.batch.classes[r] = k >= batch.classes[r] ? k + 1 : k;
    }
  }
  return res;
}

namespace {

bool features_changed(const Dataset& a, const Dataset& b, Eigen::Index i) { return a.features.row(i) != b.features.row(i); }

bool label_changed(const Dataset& a, const Dataset& b, Eigen::Index i) {
  if (a.task == Task::Classification) return a.classes[static_cast<std::size_t>(i)] != b.classes[static_cast<std::size_t>(i)];
  return a.targets.row(i) != b.targets.row(i);
}

void check_same_shape(const Dataset& clean, const Dataset& poisoned) {
  if (clean.size() != poisoned.size() || clean.input_dim() != poisoned.input_dim() || clean.task != poisoned.task ||
      clean.targets.cols() != poisoned.targets.cols()) {
    throw InvalidInput("poisoned batch does not match the clean batch shape");
  }
}

}  // namespace

Dataset project_to_budget(const Dataset& clean, const Dataset& poisoned, const Adversary& adv) {
  check_same_shape(clean, poisoned);
  Dataset out = poisoned;
  if (const auto* u = std::get_if<UnboundedAdversary>(&adv)) {
    int used = 0;
    for (Eigen::Index i = 0; i < clean.size(); ++i) {
      if (!features_changed(clean, poisoned, i) && !label_changed(clean, poisoned, i)) continue;
      if (clean.is_poisonable(i) && used < u->n) {
        ++used;
      } else {
        out.features.row(i) = clean.features.row(i);
        if (clean.task == Task::Classification) {
          out.classes[static_cast<std::size_t>(i)] = clean.classes[static_cast<std::size_t>(i)];
        } else {
          out.targets.row(i) = clean.targets.row(i);
        }
      }
    }
    return out;
  }
  const auto& a = std::get<BoundedAdversary>(adv);
  int feat_used = 0, label_used = 0;
  for (Eigen::Index i = 0; i < clean.size(); ++i) {
    const auto r = static_cast<std::size_t>(i);
    if (features_changed(clean, poisoned, i)) {
      if (clean.is_poisonable(i) && feat_used < a.n && a.epsilon > 0.0) {
        const IntervalVector ball = IntervalVector::ball(clean.x(i), a.epsilon);
        out.features.row(i) = poisoned.x(i).cwiseMax(ball.lo()).cwiseMin(ball.hi()).transpose();
        if (features_changed(clean, out, i)) ++feat_used;
      } else {
        out.features.row(i) = clean.features.row(i);
      }
    }
    if (label_changed(clean, poisoned, i)) {
      const bool may = clean.is_poisonable(i) && label_used < a.m;
      if (clean.task == Task::Classification) {
        if (may && a.label_flip) {
          ++label_used;
        } else {
          out.classes[r] = clean.classes[r];
        }
      } else if (may && a.nu > 0.0) {
        const IntervalVector ball = IntervalVector::ball(clean.targets.row(i).transpose(), a.nu);
        out.targets.row(i) = poisoned.targets.row(i).transpose().cwiseMax(ball.lo()).cwiseMin(ball.hi()).transpose();
        if (label_changed(clean, out, i)) ++label_used;
      } else {
        out.targets.row(i) = clean.targets.row(i);
      }
    }
  }
  return out;
}

bool is_feasible(const Dataset& clean, const Dataset& poisoned, const Adversary& adv) {
  check_same_shape(clean, poisoned);
  if (const auto* u = std::get_if<UnboundedAdversary>(&adv)) {
    int used = 0;
    for (Eigen::Index i = 0; i < clean.size(); ++i) {
      if (features_changed(clean, poisoned, i) || label_changed(clean, poisoned, i)) {
        if (!clean.is_poisonable(i)) return false;
        ++used;
      }
    }
    return used <= u->n;
  }
  const auto& a = std::get<BoundedAdversary>(adv);
  int feat = 0, lab = 0;
  for (Eigen::Index i = 0; i < clean.size(); ++i) {
    if (features_changed(clean, poisoned, i)) {
      if (!clean.is_poisonable(i)) return false;
      if (!IntervalVector::ball(clean.x(i), a.epsilon).contains(poisoned.x(i))) return false;
      ++feat;
    }
    if (label_changed(clean, poisoned, i)) {
      if (!clean.is_poisonable(i)) return false;
      if (clean.task == Task::Classification) {
        if (!a.label_flip) return false;
      } else if (!IntervalVector::ball(clean.targets.row(i).transpose(), a.nu)
                      .contains(poisoned.targets.row(i).transpose())) {
        return false;
      }
      ++lab;
    }
  }
  return feat <= a.n && lab <= a.m;
}

void check_attack_budget(const AttackSpec& spec, const Adversary& adv) {
  spec.validate();
  if (const auto* u = std::get_if<UnboundedAdversary>(&adv)) {
    if (std::max(spec.n, spec.m) > u->n) throw InvalidInput("attack budget exceeds the adversary's n");
    return;
  }
  const auto& a = std::get<BoundedAdversary>(adv);
  switch (spec.kind) {
    case AttackKind::ParamTargetPgd:
    case AttackKind::FeatureCollision:
      if (spec.n > a.n) throw InvalidInput("attack n exceeds the adversary's n");
      if (spec.kind == AttackKind::ParamTargetPgd && spec.epsilon > a.epsilon) {
        throw InvalidInput("attack epsilon exceeds the adversary's epsilon");
      }
      break;
    case AttackKind::LabelFlip:
      if (spec.m > a.m) throw InvalidInput("attack m exceeds the adversary's m");
      if (spec.m > 0 && !a.label_flip) throw InvalidInput("adversary does not allow label flipping");
      break;
  }
}

SoundnessReport soundness_harness(const DenseReluNetwork& init, const Dataset& data, const AgtConfig& cfg,
                                  const Adversary& adv, const std::vector<AttackSpec>& specs,
                                  const SoundnessOptions& opts) {
  if (opts.trials < 0) throw InvalidInput("trials must be >= 0");
  for (const auto& s : specs) check_attack_budget(s, adv);

  AgtConfig agt_cfg = cfg;
  agt_cfg.record_trajectory = true;
  const AgtResult box = agt_train(init, data, agt_cfg, adv);
  const auto schedule = batch_schedule(data, cfg.train);
  const std::size_t steps = schedule.size();

  std::optional<Interval> probe_bounds;
  if (opts.loss_probe) probe_bounds = loss_bound_testset(box.box, *opts.loss_probe, cfg.bound_mode);

  const int jobs = static_cast<int>(specs.size()) * opts.trials;
  std::vector<AttackTrialResult> results(static_cast<std::size_t>(jobs));
  std::vector<std::vector<double>> margins(static_cast<std::size_t>(jobs));
  std::exception_ptr failure;

#pragma omp parallel for schedule(dynamic)
  for (int j = 0; j < jobs; ++j) {
    try {
      const AttackSpec& spec = specs[static_cast<std::size_t>(j / opts.trials)];
      const int trial = j % opts.trials;
      auto rng = seeded(spec.seed, static_cast<std::uint64_t>(trial), 0xA77C);
      Eigen::VectorXd direction;
      if (spec.kind == AttackKind::ParamTargetPgd) {
        if (spec.direction) {
          direction = *spec.direction;
        } else {
          std::normal_distribution<double> gauss;
          direction = Eigen::VectorXd::NullaryExpr(init.num_params(), [&]() { return gauss(rng); });
        }
      }
      Eigen::VectorXd target;
      if (spec.kind == AttackKind::FeatureCollision) {
        if (spec.target) {
          target = *spec.target;
        } else {
          std::uniform_int_distribution<Eigen::Index> pick(0, data.size() - 1);
          target = data.x(pick(rng));
        }
      }

      DenseReluNetwork net = init;
      AttackTrialResult res{spec.kind, trial, 0, std::numeric_limits<double>::infinity(), true};
      auto& trace = margins[static_cast<std::size_t>(j)];
      trace.reserve(steps);
      for (std::size_t s = 0; s < steps; ++s) {
        const Dataset batch = data.subset(schedule[s]);
        const std::uint64_t step_seed = rng();
        Dataset poisoned;
        switch (spec.kind) {
          case AttackKind::ParamTargetPgd:
            poisoned = param_target_pgd_poison(batch, net, direction, spec, step_seed);
            break;
          case AttackKind::FeatureCollision:
            poisoned = feature_collision_attack(batch, target, std::min<int>(spec.n, static_cast<int>(batch.size())),
                                                step_seed);
            break;
          case AttackKind::LabelFlip:
            poisoned = label_flip_attack(batch, spec.m, spec.class_from, spec.class_to, step_seed).batch;
            break;
        }
        poisoned = project_to_budget(batch, poisoned, adv);
        if (!is_feasible(batch, poisoned, adv)) throw std::logic_error("attack produced an infeasible batch");
        sgd_step(net, poisoned, cfg.train.learning_rate(static_cast<long>(s)), cfg.train.clip);

        const Eigen::VectorXd theta = net.flat();
        const Eigen::VectorXd& lo = box.trajectory_lo[s + 1];
        const Eigen::VectorXd& hi = box.trajectory_hi[s + 1];
        double step_margin = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
          const double margin = std::min(theta[i] - lo[i], hi[i] - theta[i]);
          if (margin < -opts.tolerance * (1.0 + std::abs(theta[i]))) ++res.violations;
          step_margin = std::min(step_margin, margin);
        }
        trace.push_back(step_margin);
        res.min_margin = std::min(res.min_margin, step_margin);
      }
      if (probe_bounds) {
        const double l = mean_loss(net, *opts.loss_probe);
        const double slack = opts.tolerance * (1.0 + std::abs(l));
        res.loss_contained = l >= probe_bounds->lo - slack && l <= probe_bounds->hi + slack;
      }
      results[static_cast<std::size_t>(j)] = res;
    } catch (...) {
#pragma omp critical(agt_harness_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  SoundnessReport rep;
  rep.trials = jobs;
  rep.results = std::move(results);
  rep.step_min_margin.assign(steps, std::numeric_limits<double>::infinity());
  for (const auto& t : margins) {
    for (std::size_t s = 0; s < t.size(); ++s) rep.step_min_margin[s] = std::min(rep.step_min_margin[s], t[s]);
  }
  for (const auto& r : rep.results) {
    rep.violations += r.violations;
    if (!r.loss_contained) ++rep.loss_violations;
  }
  rep.box_mean_width = box.box.width().size() ? box.box.width().mean() : 0.0;
  return rep;
}

}  // namespace agt
