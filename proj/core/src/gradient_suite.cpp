#include "auecrl/gradient_suite.hpp"

#include <algorithm>
#include <chrono>
#include <random>

#include "auecrl/errors.hpp"
#include "auecrl/losses.hpp"
#include "auecrl/model.hpp"

namespace auecrl {

namespace {

// Fixed desk-scale check dimensions: A and E match the default knowledge
// file, d is the acceptance value, the rest are small to keep the sweeps
// fast without losing coverage.
constexpr int kAus = 12;
constexpr int kExpressions = 7;
constexpr int kBilinearDim = 8;
constexpr int kInputDim = 10;
constexpr int kExprFeatDim = 8;
constexpr int kAuFeatDim = 6;

Tensor random_tensor(std::mt19937_64& rng, std::vector<std::int64_t> shape, double lo,
                     double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.values()) v = dist(rng);
  return t;
}

// Magnitudes bounded away from zero; near-zero parameters or inputs yield
// near-zero gradient coordinates where the finite-difference noise floor
// dominates the relative error.
Tensor bounded_random(std::mt19937_64& rng, std::vector<std::int64_t> shape,
                      double lo_mag, double hi_mag) {
  std::uniform_real_distribution<double> mag(lo_mag, hi_mag);
  std::uniform_int_distribution<int> sign(0, 1);
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.values()) v = (sign(rng) ? 1.0 : -1.0) * mag(rng);
  return t;
}

std::vector<int> random_labels(std::mt19937_64& rng, int batch, int classes) {
  std::uniform_int_distribution<int> dist(0, classes - 1);
  std::vector<int> labels(static_cast<size_t>(batch));
  for (int& l : labels) l = dist(rng);
  return labels;
}

std::pair<std::vector<IndexPair>, std::vector<IndexPair>> random_pairs(std::mt19937_64& rng) {
  std::vector<int> order(kAus);
  for (int i = 0; i < kAus; ++i) order[static_cast<size_t>(i)] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<IndexPair> pos = {{std::min(order[0], order[1]), std::max(order[0], order[1])},
                                {std::min(order[2], order[3]), std::max(order[2], order[3])}};
  std::vector<IndexPair> neg = {{std::min(order[4], order[5]), std::max(order[4], order[5])},
                                {std::min(order[6], order[7]), std::max(order[6], order[7])}};
  return {pos, neg};
}

GradCheckReport check_loss_au(std::mt19937_64& rng, int batch, double h, double tol) {
  Graph g;
  std::vector<NodeRef> p_a_rows, pseudo_rows, wrt;
  for (int b = 0; b < batch; ++b) {
    p_a_rows.push_back(g.leaf("p_a." + std::to_string(b),
                              random_tensor(rng, {kAus}, -1.0, 1.0)));
    pseudo_rows.push_back(g.leaf("pseudo." + std::to_string(b),
                                 random_tensor(rng, {kAus}, 0.0, 1.0)));
  }
  NodeRef w_ea = g.leaf("w_ea", random_tensor(rng, {kExpressions, kAus}, 0.0, 1.0));
  Tensor prior = random_tensor(rng, {kExpressions, kAus}, 0.0, 1.0);
  NodeRef root = build_loss_au(g, p_a_rows, pseudo_rows, w_ea, prior, 1.0);
  wrt = p_a_rows;
  wrt.insert(wrt.end(), pseudo_rows.begin(), pseudo_rows.end());
  wrt.push_back(w_ea);
  return finite_difference_check(g, root, wrt, h, tol);
}

GradCheckReport check_pair_loss(std::mt19937_64& rng, int batch, bool positive, double h,
                                double tol) {
  Graph g;
  std::vector<NodeRef> logits;
  for (int b = 0; b < batch; ++b) {
    logits.push_back(g.leaf("au_logits." + std::to_string(b),
                            random_tensor(rng, {kAus}, -2.0, 2.0)));
  }
  auto [pos, neg] = random_pairs(rng);
  PairRegularizerNodes reg = build_pair_regularizers(g, logits, pos, neg);
  return finite_difference_check(g, positive ? reg.l_p : reg.l_n, logits, h, tol);
}

GradCheckReport check_loss_expr(std::mt19937_64& rng, int batch, double h, double tol) {
  Graph g;
  std::vector<NodeRef> expr_logits, au_logits, p_rows, wrt;
  for (int b = 0; b < batch; ++b) {
    expr_logits.push_back(g.leaf("expr_logits." + std::to_string(b),
                                 random_tensor(rng, {kExpressions}, -2.0, 2.0)));
    au_logits.push_back(g.leaf("au_logits." + std::to_string(b),
                               random_tensor(rng, {kAus}, -2.0, 2.0)));
    p_rows.push_back(g.softmax(expr_logits.back()));
  }
  std::vector<int> labels = random_labels(rng, batch, kExpressions);
  NodeRef l_c = build_cross_entropy(g, p_rows, labels, kExpressions);
  auto [pos, neg] = random_pairs(rng);
  PairRegularizerNodes reg = build_pair_regularizers(g, au_logits, pos, neg);
  NodeRef root = g.add(l_c, g.scale(g.add(reg.l_p, reg.l_n), 0.5));
  wrt = expr_logits;
  wrt.insert(wrt.end(), au_logits.begin(), au_logits.end());
  return finite_difference_check(g, root, wrt, h, tol);
}

// Full model, differentiated through the per-stage trainable groups: the
// composite expression loss through encoder + attention + head, the AU loss
// through the AU branch.
std::vector<GradCheckReport> check_pipeline(std::mt19937_64& rng, int batch, double h,
                                            double tol) {
  ModelConfig cfg;
  cfg.input_dim = kInputDim;
  cfg.d_e = kExprFeatDim;
  cfg.d_a = kAuFeatDim;
  cfg.d = kBilinearDim;
  cfg.num_expressions = kExpressions;
  cfg.num_aus = kAus;
  PriorMatrix prior{random_tensor(rng, {kExpressions, kAus}, 0.0, 1.0)};
  ModelState state(cfg, prior, rng());
  for (size_t i = 0; i < state.param_count(); ++i) {
    Param& p = state.param(i);
    p.value = bounded_random(rng, p.value.shape(), 0.1, 0.5);
  }

  Graph g;
  StateBinding binding = bind_state(g, state);
  std::vector<NodeRef> p_e_rows, p_a_rows, pseudo_rows, logit_rows;
  std::vector<int> labels = random_labels(rng, batch, kExpressions);
  for (int b = 0; b < batch; ++b) {
    Tensor x = bounded_random(rng, {kInputDim}, 0.3, 1.0);
    SampleNodes nodes = build_sample_forward(g, binding, state, x);
    p_e_rows.push_back(nodes.p_e);
    p_a_rows.push_back(nodes.p_a);
    logit_rows.push_back(nodes.attn_logits);
    pseudo_rows.push_back(
        g.vecmat(g.constant(Tensor::one_hot(kExpressions, labels[static_cast<size_t>(b)])),
                 binding.leaves[state.w_ea_param_index()]));
  }
  NodeRef l_c = build_cross_entropy(g, p_e_rows, labels, kExpressions);
  NodeRef l_au = build_loss_au(g, p_a_rows, pseudo_rows,
                               binding.leaves[state.w_ea_param_index()], prior.values, 1.0);
  auto [pos, neg] = random_pairs(rng);
  PairRegularizerNodes reg = build_pair_regularizers(g, logit_rows, pos, neg);
  NodeRef l_e = g.add(l_c, g.scale(g.add(reg.l_p, reg.l_n), 0.5));

  const size_t param_total = state.param_count();
  std::vector<NodeRef> l_e_wrt = {binding.leaves[0], binding.leaves[1]};  // encoder
  for (size_t i = param_total - 6; i < param_total; ++i) {               // attention + head
    l_e_wrt.push_back(binding.leaves[i]);
  }
  std::vector<NodeRef> l_au_wrt;  // W_EA + AU classifiers
  for (size_t i = state.w_ea_param_index(); i < param_total - 6; ++i) {
    l_au_wrt.push_back(binding.leaves[i]);
  }

  std::vector<GradCheckReport> reports;
  reports.push_back(finite_difference_check(g, l_e, l_e_wrt, h, tol));
  reports.push_back(finite_difference_check(g, l_au, l_au_wrt, h, tol));
  return reports;
}

}  // namespace

GradientSuiteResult run_gradient_suite(const GradientSuiteOptions& options) {
  if (options.instances < 1) throw ConfigError("gradient suite: instances must be positive");
  if (options.max_batch < 1 || options.max_batch > 64) {
    throw ConfigError("gradient suite: max_batch out of range");
  }
  static const std::vector<std::string> kAllOps = {"l_au", "l_p", "l_n", "l_e", "pipeline"};
  std::vector<std::string> ops = options.ops.empty() ? kAllOps : options.ops;
  for (const std::string& op : ops) {
    if (std::find(kAllOps.begin(), kAllOps.end(), op) == kAllOps.end()) {
      throw ConfigError("gradient suite: unknown op '" + op + "'");
    }
  }

  const auto start = std::chrono::steady_clock::now();
  GradientSuiteResult result;
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<int> batch_dist(1, options.max_batch);

  auto record = [&](const std::string& op, int instance, GradCheckReport report) {
    if (!report.pass) result.pass = false;
    if (report.worst_err >= result.worst_err) {
      result.worst_err = report.worst_err;
      result.worst_param = op + "/" + report.worst_param;
    }
    result.items.push_back({op, instance, std::move(report)});
  };

  for (int i = 0; i < options.instances; ++i) {
    const int batch = batch_dist(rng);
    for (const std::string& op : ops) {
      if (op == "l_au") {
        record(op, i, check_loss_au(rng, batch, options.step, options.tolerance));
      } else if (op == "l_p") {
        record(op, i, check_pair_loss(rng, batch, true, options.step, options.tolerance));
      } else if (op == "l_n") {
        record(op, i, check_pair_loss(rng, batch, false, options.step, options.tolerance));
      } else if (op == "l_e") {
        record(op, i, check_loss_expr(rng, batch, options.step, options.tolerance));
      } else {
        auto reports = check_pipeline(rng, batch, options.step, options.tolerance);
        record("pipeline/l_e", i, std::move(reports[0]));
        record("pipeline/l_au", i, std::move(reports[1]));
      }
    }
  }
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace auecrl
