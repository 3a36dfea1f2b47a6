#pragma once

#include <span>
#include <vector>

#include "auecrl/graph.hpp"
#include "auecrl/knowledge.hpp"
#include "auecrl/tensor.hpp"

namespace auecrl {

// Batch estimates of AU existence probabilities. Marginals are batch means
// of per-sample soft scores; joints are batch means of per-sample score
// products, so joint_11 + joint_10 reproduces marginal_1 exactly.
struct ProbEstimates {
  Tensor marginal_1;  // [A], p(i1)
  Tensor marginal_0;  // [A], p(i0) = 1 - p(i1)
  Tensor joint_11;    // [A x A], p(i1, j1)
  Tensor joint_10;    // [A x A], p(i1, j0)
  Tensor joint_01;    // [A x A], p(i0, j1)
};

struct LossReport {
  double l_c = 0.0;
  double l_p = 0.0;
  double l_n = 0.0;
  double l_au = 0.0;
  double l_e = 0.0;
  double alpha = 0.5;
  double lambda = 1.0;
};

// sigmoid(logit); "AU exists" <=> score > 0.5 <=> logit > 0.
Tensor existence_scores(const Tensor& logits);

ProbEstimates batch_probs(const Tensor& scores);  // scores [B x A]

// Hinge penalties for expected-co-occurrence violations over the pair sets.
double loss_pos(const ProbEstimates& probs, std::span<const IndexPair> positive_pairs);
double loss_neg(const ProbEstimates& probs, std::span<const IndexPair> negative_pairs);

// ||p_a - pseudo||^2 + lambda ||W_EA - prior||^2; the batch overload averages
// the first term over rows.
double loss_au(const Tensor& p_a, const Tensor& pseudo, const Tensor& w_ea,
               const Tensor& prior, double lambda);
double loss_au_batch(const Tensor& p_a, const Tensor& pseudo, const Tensor& w_ea,
                     const Tensor& prior, double lambda);

double cross_entropy_mean(const Tensor& predictions, std::span<const int> labels);

// l_e = l_c + alpha (l_p + l_n); l_au is carried through for reporting.
LossReport loss_expr(const Tensor& predictions, std::span<const int> labels,
                     double l_p, double l_n, double alpha, double l_au = 0.0,
                     double lambda = 1.0);

// --- graph builders (the differentiable route used in training) -------------

struct PairRegularizerNodes {
  NodeRef l_p;
  NodeRef l_n;
};

// per_sample_logits: one [A] node per batch row (pre-normalization logits).
PairRegularizerNodes build_pair_regularizers(Graph& g,
                                             std::span<const NodeRef> per_sample_logits,
                                             std::span<const IndexPair> positive_pairs,
                                             std::span<const IndexPair> negative_pairs);

NodeRef build_loss_au(Graph& g, std::span<const NodeRef> p_a_rows,
                      std::span<const NodeRef> pseudo_rows, NodeRef w_ea,
                      const Tensor& prior, double lambda);

NodeRef build_cross_entropy(Graph& g, std::span<const NodeRef> prediction_rows,
                            std::span<const int> labels, int num_classes);

}  // namespace auecrl
