#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "auecrl/gradcheck.hpp"

namespace auecrl {

// Randomized finite-difference verification of the training objectives:
// the AU loss, both co-occurrence regularizers, the composite expression
// loss, and the full forward pipeline differentiated through every
// unfrozen parameter.
struct GradientSuiteOptions {
  std::uint64_t seed = 20240 + 7;
  int instances = 20;
  double step = 1e-5;
  double tolerance = 1e-4;
  int max_batch = 8;
  // Subset of {"l_au","l_p","l_n","l_e","pipeline"}; empty = all.
  std::vector<std::string> ops;
};

struct GradientSuiteResult {
  struct Item {
    std::string op;
    int instance = 0;
    GradCheckReport report;
  };
  std::vector<Item> items;
  bool pass = true;
  std::string worst_param;
  double worst_err = 0.0;
  double seconds = 0.0;
};

GradientSuiteResult run_gradient_suite(const GradientSuiteOptions& options);

}  // namespace auecrl
