#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "auecrl/knowledge.hpp"
#include "auecrl/model.hpp"
#include "auecrl/param.hpp"
#include "auecrl/synthdata.hpp"

namespace auecrl {

// One stage of the three-stage schedule. Trainable groups are implied by the
// stage number (see ModelState::apply_stage_freeze).
struct StagePlan {
  int stage = 1;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
  int epochs = 50;
  int batch_size = 32;
  // Optional step decay, off by default: lr * factor^(epoch / every).
  double lr_decay_factor = 1.0;
  int lr_decay_every = 0;

  static StagePlan defaults(int stage);  // lrs 0.01 / 0.001 / 0.0001
  void validate() const;                 // throws ConfigError
};

struct EpochStats {
  double loss = 0.0;  // the stage objective
  double l_c = 0.0;
  double l_p = 0.0;
  double l_n = 0.0;
  double l_au = 0.0;
};

using LossHistory = std::vector<EpochStats>;

// Knowledge-derived constants the objectives need.
struct TrainContext {
  Tensor prior;  // E x A
  std::vector<IndexPair> positive_pairs;
  std::vector<IndexPair> negative_pairs;
  double lambda = 1.0;
  double alpha = 0.5;
};

// v <- momentum v + g + wd theta; theta <- theta - lr v, skipping frozen
// params; clamp01 params are clamped to [0,1] afterwards.
void sgd_step(std::span<Param> params, double lr, double momentum, double weight_decay);

// Runs one stage over the dataset; deterministic given (seed, data, state).
// Shuffling is a fixed permutation derived from (seed, stage, epoch).
LossHistory run_stage(const StagePlan& plan, ModelState& state, const Dataset& data,
                      const TrainContext& ctx, std::uint64_t seed);

struct Metrics {
  std::vector<std::optional<double>> per_class_acc;  // percent; nullopt = no samples
  double average_acc = 0.0;                          // mean over non-empty classes
  double overall_acc = 0.0;
  std::vector<std::vector<std::int64_t>> confusion;  // [true][predicted]
  std::int64_t n = 0;
};

// Metric arithmetic on already-computed argmax predictions.
Metrics compute_metrics(std::span<const int> predictions, std::span<const int> labels,
                        int num_classes);

// Argmax predictions (ties to the lowest class index) against labels.
Metrics evaluate(const ModelState& state, const Dataset& data);

}  // namespace auecrl
