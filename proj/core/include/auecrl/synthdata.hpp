#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "auecrl/knowledge.hpp"
#include "auecrl/tensor.hpp"

namespace auecrl {

struct GenConfig {
  std::int64_t n_samples = 1000;
  int input_dim = 32;
  int num_expressions = 7;
  int num_aus = 12;
  double signal_strength = 0.5;  // mu, per-AU bump along its direction
  double noise_std = 0.05;       // sigma, isotropic Gaussian noise
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError naming the offending field
};

struct SynthSample {
  Tensor x;                       // [input_dim]
  int label = 0;                  // expression index
  std::vector<std::uint8_t> au_truth;  // planted activations, diagnostics only
};

struct Dataset {
  int input_dim = 0;
  int num_expressions = 0;
  int num_aus = 0;
  std::vector<SynthSample> samples;

  std::int64_t size() const { return static_cast<std::int64_t>(samples.size()); }
};

// Planted-structure generation: y ~ uniform(E); au_truth[a] ~ Bernoulli of
// the prior entry for (y, a); x = c_y + sum_a au_truth[a] * mu * u_a + noise,
// with {c_y} and {u_a} fixed unit directions derived from the seed alone.
Dataset generate(const GenConfig& cfg, const KnowledgeBase& kb, const PriorMatrix& prior);

void write_dataset(const Dataset& dataset, const std::string& path);
Dataset read_dataset(const std::string& path);

}  // namespace auecrl
