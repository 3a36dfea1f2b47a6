#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "auecrl/tensor.hpp"

namespace auecrl {

// Unordered AU pair stored canonically as (min, max) list indices.
using IndexPair = std::pair<int, int>;

struct AuInfo {
  std::string id;    // token used in knowledge files, e.g. "AU12"
  int facs_number;   // 12
  std::string name;  // "lip corner puller"
};

enum class Relevance : std::uint8_t { kNone = 0, kSecondary = 1, kPrimary = 2 };

// Three-level relevance probabilities. Valid iff 0 <= none < secondary <= ...
struct RelevanceLevels {
  double primary = 0.9;
  double secondary = 0.5;
  double none = 0.05;

  void validate() const;  // throws ValidationError
};

// Expression names, AU identifiers, the expression<->AU relevance table and
// the AU co-occurrence pair sets. Immutable after load; safe to share
// read-only across threads.
class KnowledgeBase {
 public:
  static KnowledgeBase parse(const std::string& text, const std::string& source_name);
  static KnowledgeBase builtin_default();

  int num_expressions() const { return static_cast<int>(expressions_.size()); }
  int num_aus() const { return static_cast<int>(aus_.size()); }

  const std::vector<std::string>& expressions() const { return expressions_; }
  const std::vector<AuInfo>& aus() const { return aus_; }
  Relevance relevance(int expression, int au) const;
  const RelevanceLevels& levels() const { return levels_; }

  // Canonical (min,max) order, sorted; indices are positions in aus().
  const std::vector<IndexPair>& positive_pairs() const { return positive_pairs_; }
  const std::vector<IndexPair>& negative_pairs() const { return negative_pairs_; }

  // -1 if not present.
  int expression_index(const std::string& name) const;
  int au_index(const std::string& id) const;

 private:
  friend class KnowledgeParser;
  void validate() const;

  std::vector<std::string> expressions_;
  std::vector<AuInfo> aus_;
  std::vector<Relevance> relevance_;  // row-major E x A
  RelevanceLevels levels_;
  std::vector<IndexPair> positive_pairs_;
  std::vector<IndexPair> negative_pairs_;
};

struct PriorMatrix {
  Tensor values;  // E x A
};

KnowledgeBase load_knowledge(const std::string& path);

// values[e][a] = primary_p / secondary_p / none_p per the relevance table.
PriorMatrix prior_matrix(const KnowledgeBase& kb, const RelevanceLevels& levels);

// The stored pair sets, canonical (min,max) order.
std::pair<std::vector<IndexPair>, std::vector<IndexPair>> pair_sets(const KnowledgeBase& kb);

// Text of the built-in knowledge file (7 basic expressions, 12 AUs).
const std::string& default_knowledge_text();

}  // namespace auecrl
