#include "auecrl/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "auecrl/errors.hpp"

namespace auecrl {

GradCheckReport finite_difference_check(Graph& g, NodeRef root,
                                        std::span<const NodeRef> wrt,
                                        double h, double tol) {
  if (h <= 0.0) throw NumericsError("finite_difference_check: step must be positive");

  GradCheckReport report;
  report.step = h;
  report.tolerance = tol;

  g.recompute();
  g.backward(root);

  // Snapshot analytic gradients before the perturbation sweeps clobber state.
  std::vector<Tensor> analytic;
  analytic.reserve(wrt.size());
  for (NodeRef p : wrt) analytic.push_back(g.grad(p));

  for (size_t pi = 0; pi < wrt.size(); ++pi) {
    NodeRef p = wrt[pi];
    GradCheckEntry entry;
    entry.param = g.name(p);

    Tensor& value = g.leaf_value(p);
    const std::int64_t count = value.size();
    double err_sum = 0.0;
    for (std::int64_t i = 0; i < count; ++i) {
      const double saved = value[i];
      value[i] = saved + h;
      g.recompute();
      const double f_plus = g.value(root).as_scalar();
      value[i] = saved - h;
      g.recompute();
      const double f_minus = g.value(root).as_scalar();
      value[i] = saved;

      const double numeric = (f_plus - f_minus) / (2.0 * h);
      const double a = analytic[pi][i];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-12});
      const double rel = std::fabs(a - numeric) / denom;
      err_sum += rel;
      if (rel > entry.max_rel_err) entry.max_rel_err = rel;
    }
    entry.mean_rel_err = count > 0 ? err_sum / static_cast<double>(count) : 0.0;
    entry.pass = entry.max_rel_err <= tol;
    if (entry.max_rel_err >= report.worst_err) {
      report.worst_err = entry.max_rel_err;
      report.worst_param = entry.param;
    }
    report.pass = report.pass && entry.pass;
    report.params.push_back(std::move(entry));
  }

  g.recompute();
  return report;
}

}  // namespace auecrl
