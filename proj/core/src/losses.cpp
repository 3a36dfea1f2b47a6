#include "auecrl/losses.hpp"

#include <algorithm>
#include <cmath>

#include "auecrl/errors.hpp"
#include "auecrl/math.hpp"

namespace auecrl {

Tensor existence_scores(const Tensor& logits) {
  Tensor scores = logits;
  for (double& v : scores.values()) v = math::stable_sigmoid(v);
  return scores;
}

ProbEstimates batch_probs(const Tensor& scores) {
  if (scores.rank() != 2) {
    throw ShapeError("batch_probs expects a [B x A] score matrix, got " + scores.shape_str());
  }
  const std::int64_t batch = scores.dim(0);
  const std::int64_t a_count = scores.dim(1);
  for (double v : scores.values()) {
    if (v < 0.0 || v > 1.0) throw ShapeError("batch_probs: scores must lie in [0,1]");
  }

  ProbEstimates out;
  out.marginal_1 = Tensor::zeros({a_count});
  out.marginal_0 = Tensor::zeros({a_count});
  out.joint_11 = Tensor::zeros({a_count, a_count});
  out.joint_10 = Tensor::zeros({a_count, a_count});
  out.joint_01 = Tensor::zeros({a_count, a_count});

  const double bsize = static_cast<double>(batch);
  for (std::int64_t i = 0; i < a_count; ++i) {
    double acc = 0.0;
    for (std::int64_t b = 0; b < batch; ++b) acc += scores(b, i);
    out.marginal_1(i) = acc / bsize;
    out.marginal_0(i) = 1.0 - out.marginal_1(i);
  }
  for (std::int64_t i = 0; i < a_count; ++i) {
    for (std::int64_t j = 0; j < a_count; ++j) {
      double acc11 = 0.0, acc10 = 0.0, acc01 = 0.0;
      for (std::int64_t b = 0; b < batch; ++b) {
        const double si = scores(b, i);
        const double sj = scores(b, j);
        acc11 += si * sj;
        acc10 += si * (1.0 - sj);
        acc01 += (1.0 - si) * sj;
      }
      out.joint_11(i, j) = acc11 / bsize;
      out.joint_10(i, j) = acc10 / bsize;
      out.joint_01(i, j) = acc01 / bsize;
    }
  }
  return out;
}

namespace {

double hinge(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace

double loss_pos(const ProbEstimates& probs, std::span<const IndexPair> positive_pairs) {
  double total = 0.0;
  for (const IndexPair& pair : positive_pairs) {
    const std::int64_t i = pair.first, j = pair.second;
    const double j11 = probs.joint_11(i, j);
    const double pair_term = hinge(probs.marginal_1(i) * probs.marginal_1(j) - j11) +
                             hinge(probs.joint_10(i, j) - j11) +
                             hinge(probs.joint_01(i, j) - j11);
    total += pair_term;
  }
  return total;
}

double loss_neg(const ProbEstimates& probs, std::span<const IndexPair> negative_pairs) {
  double total = 0.0;
  for (const IndexPair& pair : negative_pairs) {
    const std::int64_t i = pair.first, j = pair.second;
    const double j11 = probs.joint_11(i, j);
    const double pair_term = hinge(j11 - probs.marginal_1(i) * probs.marginal_1(j)) +
                             hinge(j11 - probs.joint_10(i, j)) +
                             hinge(j11 - probs.joint_01(i, j));
    total += pair_term;
  }
  return total;
}

namespace {

double squared_distance(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
  }
  double acc = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace

double loss_au(const Tensor& p_a, const Tensor& pseudo, const Tensor& w_ea,
               const Tensor& prior, double lambda) {
  return squared_distance(p_a, pseudo, "loss_au") +
         lambda * squared_distance(w_ea, prior, "loss_au regularizer");
}

double loss_au_batch(const Tensor& p_a, const Tensor& pseudo, const Tensor& w_ea,
                     const Tensor& prior, double lambda) {
  if (p_a.rank() != 2 || !p_a.same_shape(pseudo)) {
    throw ShapeError("loss_au_batch expects matching [B x A] matrices");
  }
  const std::int64_t batch = p_a.dim(0);
  const std::int64_t a_count = p_a.dim(1);
  double acc = 0.0;
  for (std::int64_t b = 0; b < batch; ++b) {
    double row = 0.0;
    for (std::int64_t i = 0; i < a_count; ++i) {
      const double d = p_a(b, i) - pseudo(b, i);
      row += d * d;
    }
    acc += row;
  }
  return acc / static_cast<double>(batch) +
         lambda * squared_distance(w_ea, prior, "loss_au regularizer");
}

double cross_entropy_mean(const Tensor& predictions, std::span<const int> labels) {
  if (predictions.rank() != 2 ||
      predictions.dim(0) != static_cast<std::int64_t>(labels.size())) {
    throw ShapeError("cross_entropy_mean expects [B x E] predictions with B labels");
  }
  const std::int64_t e_count = predictions.dim(1);
  double acc = 0.0;
  for (size_t b = 0; b < labels.size(); ++b) {
    if (labels[b] < 0 || labels[b] >= e_count) {
      throw ShapeError("label " + std::to_string(labels[b]) + " out of range");
    }
    acc += -std::log(std::max(predictions(static_cast<std::int64_t>(b), labels[b]),
                              Graph::kLogGuard));
  }
  return acc / static_cast<double>(labels.size());
}

LossReport loss_expr(const Tensor& predictions, std::span<const int> labels,
                     double l_p, double l_n, double alpha, double l_au, double lambda) {
  LossReport report;
  report.alpha = alpha;
  report.lambda = lambda;
  report.l_p = l_p;
  report.l_n = l_n;
  report.l_au = l_au;
  report.l_c = cross_entropy_mean(predictions, labels);
  report.l_e = report.l_c + alpha * (l_p + l_n);
  return report;
}

// --- graph builders ----------------------------------------------------------

PairRegularizerNodes build_pair_regularizers(Graph& g,
                                             std::span<const NodeRef> per_sample_logits,
                                             std::span<const IndexPair> positive_pairs,
                                             std::span<const IndexPair> negative_pairs) {
  const std::int64_t batch = static_cast<std::int64_t>(per_sample_logits.size());
  if (batch == 0) throw ShapeError("pair regularizers need at least one sample");

  std::vector<NodeRef> scores;
  scores.reserve(per_sample_logits.size());
  for (NodeRef logits : per_sample_logits) scores.push_back(g.sigmoid(logits));

  NodeRef ones = g.constant(Tensor::full({batch}, 1.0));

  auto column = [&](int au) {
    std::vector<NodeRef> entries;
    entries.reserve(scores.size());
    for (NodeRef s : scores) entries.push_back(g.index(s, au));
    return g.concat(entries);
  };

  struct PairStats {
    NodeRef j11, j10, j01, mm;
  };
  auto stats_for = [&](const IndexPair& pair) {
    NodeRef si = column(pair.first);
    NodeRef sj = column(pair.second);
    PairStats st;
    st.j11 = g.mean(g.hadamard(si, sj));
    st.j10 = g.mean(g.hadamard(si, g.sub(ones, sj)));
    st.j01 = g.mean(g.hadamard(g.sub(ones, si), sj));
    st.mm = g.hadamard(g.mean(si), g.mean(sj));
    return st;
  };

  NodeRef l_p = g.constant(Tensor::scalar(0.0));
  for (const IndexPair& pair : positive_pairs) {
    PairStats st = stats_for(pair);
    NodeRef term = g.add(g.add(g.hinge(g.sub(st.mm, st.j11)),
                               g.hinge(g.sub(st.j10, st.j11))),
                         g.hinge(g.sub(st.j01, st.j11)));
    l_p = g.add(l_p, term);
  }
  NodeRef l_n = g.constant(Tensor::scalar(0.0));
  for (const IndexPair& pair : negative_pairs) {
    PairStats st = stats_for(pair);
    NodeRef term = g.add(g.add(g.hinge(g.sub(st.j11, st.mm)),
                               g.hinge(g.sub(st.j11, st.j10))),
                         g.hinge(g.sub(st.j11, st.j01)));
    l_n = g.add(l_n, term);
  }
  return {l_p, l_n};
}

NodeRef build_loss_au(Graph& g, std::span<const NodeRef> p_a_rows,
                      std::span<const NodeRef> pseudo_rows, NodeRef w_ea,
                      const Tensor& prior, double lambda) {
  if (p_a_rows.size() != pseudo_rows.size() || p_a_rows.empty()) {
    throw ShapeError("build_loss_au: prediction/pseudo row counts differ");
  }
  std::vector<NodeRef> row_errors;
  row_errors.reserve(p_a_rows.size());
  for (size_t b = 0; b < p_a_rows.size(); ++b) {
    row_errors.push_back(g.squared_error(p_a_rows[b], pseudo_rows[b]));
  }
  NodeRef data_term = g.mean(g.concat(row_errors));
  NodeRef reg = g.squared_error(w_ea, g.constant(prior));
  return g.add(data_term, g.scale(reg, lambda));
}

NodeRef build_cross_entropy(Graph& g, std::span<const NodeRef> prediction_rows,
                            std::span<const int> labels, int num_classes) {
  if (prediction_rows.size() != labels.size() || prediction_rows.empty()) {
    throw ShapeError("build_cross_entropy: prediction/label counts differ");
  }
  std::vector<NodeRef> terms;
  terms.reserve(prediction_rows.size());
  for (size_t b = 0; b < prediction_rows.size(); ++b) {
    NodeRef target = g.constant(Tensor::one_hot(num_classes, labels[b]));
    terms.push_back(g.cross_entropy(prediction_rows[b], target));
  }
  return g.mean(g.concat(terms));
}

}  // namespace auecrl
