#pragma once

#include <span>
#include <string>
#include <vector>

#include "auecrl/graph.hpp"

namespace auecrl {

struct GradCheckEntry {
  std::string param;
  double max_rel_err = 0.0;
  double mean_rel_err = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  double step = 1e-5;
  double tolerance = 1e-4;
  std::vector<GradCheckEntry> params;
  bool pass = true;
  std::string worst_param;
  double worst_err = 0.0;
};

// Compares the analytic gradient of `root` with central finite differences
// (f(x+h) - f(x-h)) / 2h per scalar coordinate of each leaf in `wrt`.
// Relative error uses denominator max(|analytic|, |numeric|, 1e-12).
// Leaves are restored and the graph is left recomputed at its original point.
GradCheckReport finite_difference_check(Graph& g, NodeRef root,
                                        std::span<const NodeRef> wrt,
                                        double h, double tol);

}  // namespace auecrl
