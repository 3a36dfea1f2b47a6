#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "auecrl/knowledge.hpp"
#include "auecrl/model.hpp"
#include "auecrl/training.hpp"

namespace auecrl {

// Full run configuration: `key = value` lines, optional [stage1]..[stage3]
// sections, '#' comments. CLI flags override file values.
struct RunConfig {
  std::string knowledge_path;  // empty = built-in knowledge
  std::string data_path;
  std::string output_dir = "out";
  std::uint64_t seed = 0;

  ModelConfig model;
  double lambda = 1.0;  // AU-loss prior regularizer weight
  double alpha = 0.5;   // co-occurrence regularizer weight
  std::optional<RelevanceLevels> levels;  // overrides the knowledge file levels

  std::array<StagePlan, 3> stages = {StagePlan::defaults(1), StagePlan::defaults(2),
                                     StagePlan::defaults(3)};

  const StagePlan& stage(int s) const { return stages[static_cast<size_t>(s - 1)]; }
  StagePlan& stage(int s) { return stages[static_cast<size_t>(s - 1)]; }

  // Throws ConfigError on inconsistent values or knowledge-file mismatch.
  void validate_against(const KnowledgeBase& kb) const;

  RelevanceLevels effective_levels(const KnowledgeBase& kb) const {
    return levels ? *levels : kb.levels();
  }
};

RunConfig parse_run_config(const std::string& text, const std::string& source_name);
RunConfig load_run_config(const std::string& path);

}  // namespace auecrl
