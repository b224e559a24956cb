#include "agt/certify.hpp"

#include <algorithm>

namespace agt {

std::uint64_t Certificate::reachable_mask() const {
  std::uint64_t m = 0;
  for (int c : reachable) {
    if (c < 64) m |= std::uint64_t{1} << c;
  }
  return m;
}

std::vector<int> reachable_classes(const IntervalVector& logits) {
  const Eigen::Index k = logits.size();
  const double best_lo = logits.lo().maxCoeff();
  std::vector<int> out;
  for (Eigen::Index i = 0; i < k; ++i) {
    bool dominated = false;
    if (logits.hi()[i] < best_lo) {
      // The maximum lower bound may belong to i itself; check the others.
      for (Eigen::Index j = 0; j < k && !dominated; ++j) dominated = j != i && logits.hi()[i] < logits.lo()[j];
    }
    if (!dominated) out.push_back(static_cast<int>(i));
  }
  return out;
}

namespace {

Certificate make_certificate(const ParamBox& box, const Eigen::VectorXd& x, const Target& y,
                             const IntervalVector& input, BoundMode mode) {
  const DenseReluNetwork& net = box.nominal();
  const LayerBounds fwd = forward_bounds(box, input, mode);
  const Eigen::VectorXd nominal = forward(net, x);
  Certificate c;
  // Keep the nominal point inside the reported enclosures.
  c.logits = hull(fwd.logits(), nominal);
  const Interval l = loss_bounds(net.loss(), c.logits, y, LabelBall{}).loss;
  const double nominal_loss = loss_value(net.loss(), nominal, y);
  c.loss = Interval{std::min(l.lo, nominal_loss), std::max(l.hi, nominal_loss)};
  if (y.is_class()) {
    c.label = y.class_index;
    c.nominal_prediction = argmax(nominal);
    c.reachable = reachable_classes(c.logits);
  }
  return c;
}

}  // namespace

Certificate certified_prediction(const ParamBox& box, const Eigen::VectorXd& x, const Target& y, BoundMode mode) {
  Certificate c = make_certificate(box, x, y, IntervalVector::point(x), mode);
  c.certified = y.is_class() && c.reachable.size() == 1 && c.reachable[0] == y.class_index;
  return c;
}

Certificate backdoor_certificate(const ParamBox& box, const Eigen::VectorXd& x, const Target& y, double radius,
                                 const std::vector<int>& safe, BoundMode mode) {
  if (!(radius >= 0.0)) throw InvalidInput("trigger radius must be >= 0");
  Certificate c = make_certificate(box, x, y, IntervalVector::ball(x, radius), mode);
  if (!y.is_class()) return c;
  const std::vector<int> safe_set = safe.empty() ? std::vector<int>{y.class_index} : safe;
  c.certified = std::all_of(c.reachable.begin(), c.reachable.end(), [&](int k) {
    return std::find(safe_set.begin(), safe_set.end(), k) != safe_set.end();
  });
  return c;
}

std::vector<Certificate> certify_dataset(const ParamBox& box, const Dataset& data, double backdoor_radius,
                                         const std::vector<int>& safe, BoundMode mode) {
  std::vector<Certificate> out(static_cast<std::size_t>(data.size()));
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    try {
      out[static_cast<std::size_t>(i)] =
          backdoor_radius > 0.0 || !safe.empty()
              ? backdoor_certificate(box, data.x(i), data.target(i), backdoor_radius, safe, mode)
              : certified_prediction(box, data.x(i), data.target(i), mode);
    } catch (...) {
#pragma omp critical(agt_certify_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

double certified_accuracy(const ParamBox& box, const Dataset& data, BoundMode mode) {
  if (data.size() == 0) throw InvalidInput("certified_accuracy: empty test set");
  if (data.task != Task::Classification) throw InvalidInput("certified_accuracy: classification only");
  const auto certs = certify_dataset(box, data, 0.0, {}, mode);
  const auto hits = std::count_if(certs.begin(), certs.end(), [](const Certificate& c) { return c.certified; });
  return static_cast<double>(hits) / static_cast<double>(certs.size());
}

Interval loss_bound_testset(const ParamBox& box, const Dataset& data, BoundMode mode) {
  if (data.size() == 0) throw InvalidInput("loss_bound_testset: empty test set");
  const auto certs = certify_dataset(box, data, 0.0, {}, mode);
  Interval mean{0.0, 0.0};
  for (const auto& c : certs) {
    mean.lo += c.loss.lo;
    mean.hi += c.loss.hi;
  }
  mean.lo /= static_cast<double>(certs.size());
  mean.hi /= static_cast<double>(certs.size());
  return mean;
}

}  // namespace agt
