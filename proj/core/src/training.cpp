#include "auecrl/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "auecrl/errors.hpp"
#include "auecrl/losses.hpp"

namespace auecrl {

namespace {

constexpr double kStageLearningRates[3] = {0.01, 0.001, 0.0001};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t epoch_seed(std::uint64_t seed, int stage, int epoch) {
  return splitmix64(splitmix64(seed ^ (static_cast<std::uint64_t>(stage) << 56)) +
                    static_cast<std::uint64_t>(epoch));
}

std::vector<std::int64_t> epoch_permutation(std::int64_t n, std::uint64_t seed) {
  std::vector<std::int64_t> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::uint64_t state = seed;
  for (std::int64_t i = n - 1; i > 0; --i) {
    state = splitmix64(state);
    std::swap(perm[static_cast<size_t>(i)],
              perm[static_cast<size_t>(state % static_cast<std::uint64_t>(i + 1))]);
  }
  return perm;
}

}  // namespace

StagePlan StagePlan::defaults(int stage) {
  if (stage < 1 || stage > 3) {
    throw ConfigError("stage must be 1, 2 or 3, got " + std::to_string(stage));
  }
  StagePlan plan;
  plan.stage = stage;
  plan.lr = kStageLearningRates[stage - 1];
  return plan;
}

void StagePlan::validate() const {
  if (stage < 1 || stage > 3) throw ConfigError("stage plan: stage must be 1, 2 or 3");
  if (!(lr > 0.0)) throw ConfigError("stage plan: lr must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("stage plan: momentum must be in [0,1)");
  if (weight_decay < 0.0) throw ConfigError("stage plan: weight_decay must be nonnegative");
  if (epochs < 1) throw ConfigError("stage plan: epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("stage plan: batch_size must be at least 1");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) {
    throw ConfigError("stage plan: lr_decay_factor must be in (0,1]");
  }
  if (lr_decay_every < 0) throw ConfigError("stage plan: lr_decay_every must be nonnegative");
}

void sgd_step(std::span<Param> params, double lr, double momentum, double weight_decay) {
  for (Param& p : params) {
    if (p.frozen) continue;
    p.gradient.check_finite("gradient of " + p.name);
    auto v = p.momentum.values();
    auto g = p.gradient.values();
    auto theta = p.value.values();
    for (size_t i = 0; i < theta.size(); ++i) {
      v[i] = momentum * v[i] + g[i] + weight_decay * theta[i];
      theta[i] -= lr * v[i];
    }
    if (p.clamp01) {
      for (double& x : theta) x = std::clamp(x, 0.0, 1.0);
    }
  }
}

LossHistory run_stage(const StagePlan& plan, ModelState& state, const Dataset& data,
                      const TrainContext& ctx, std::uint64_t seed) {
  plan.validate();
  if (data.samples.empty()) throw ConfigError("run_stage: dataset is empty");
  const ModelConfig& cfg = state.config();
  if (data.input_dim != cfg.input_dim || data.num_expressions != cfg.num_expressions ||
      data.num_aus != cfg.num_aus) {
    throw ConfigError("run_stage: dataset dimensions do not match the model config");
  }
  if (ctx.prior.rank() != 2 || ctx.prior.dim(0) != cfg.num_expressions ||
      ctx.prior.dim(1) != cfg.num_aus) {
    throw ShapeError("run_stage: prior matrix shape mismatch");
  }

  state.apply_stage_freeze(plan.stage);
  const size_t w_ea_leaf = state.w_ea_param_index();

  LossHistory history;
  history.reserve(static_cast<size_t>(plan.epochs));
  const std::int64_t n = data.size();

  for (int epoch = 0; epoch < plan.epochs; ++epoch) {
    double lr = plan.lr;
    if (plan.lr_decay_every > 0) {
      lr *= std::pow(plan.lr_decay_factor, epoch / plan.lr_decay_every);
    }
    const std::vector<std::int64_t> perm =
        epoch_permutation(n, epoch_seed(seed, plan.stage, epoch));

    EpochStats stats;
    int batches = 0;
    for (std::int64_t start = 0; start < n; start += plan.batch_size) {
      const std::int64_t end = std::min<std::int64_t>(start + plan.batch_size, n);

      Graph g;
      StateBinding binding = bind_state(g, state);
      std::vector<NodeRef> p_e_rows, p_a_rows, pseudo_rows, logit_rows;
      std::vector<int> labels;
      for (std::int64_t k = start; k < end; ++k) {
        const SynthSample& sample = data.samples[static_cast<size_t>(perm[static_cast<size_t>(k)])];
        SampleNodes nodes = build_sample_forward(g, binding, state, sample.x);
        p_e_rows.push_back(nodes.p_e);
        p_a_rows.push_back(nodes.p_a);
        logit_rows.push_back(nodes.attn_logits);
        pseudo_rows.push_back(g.vecmat(
            g.constant(Tensor::one_hot(cfg.num_expressions, sample.label)),
            binding.leaves[w_ea_leaf]));
        labels.push_back(sample.label);
      }

      NodeRef l_c = build_cross_entropy(g, p_e_rows, labels, cfg.num_expressions);
      NodeRef l_au = build_loss_au(g, p_a_rows, pseudo_rows, binding.leaves[w_ea_leaf],
                                   ctx.prior, ctx.lambda);
      PairRegularizerNodes reg = build_pair_regularizers(g, logit_rows, ctx.positive_pairs,
                                                         ctx.negative_pairs);
      NodeRef l_e = g.add(l_c, g.scale(g.add(reg.l_p, reg.l_n), ctx.alpha));

      NodeRef objective = plan.stage == 1 ? l_c : plan.stage == 2 ? l_au : l_e;
      g.backward(objective);
      collect_gradients(g, binding, state);
      sgd_step(state.params(), lr, plan.momentum, plan.weight_decay);

      stats.l_c += g.value(l_c).as_scalar();
      stats.l_p += g.value(reg.l_p).as_scalar();
      stats.l_n += g.value(reg.l_n).as_scalar();
      stats.l_au += g.value(l_au).as_scalar();
      stats.loss += g.value(objective).as_scalar();
      ++batches;
    }
    const double inv = 1.0 / batches;
    stats.l_c *= inv;
    stats.l_p *= inv;
    stats.l_n *= inv;
    stats.l_au *= inv;
    stats.loss *= inv;
    history.push_back(stats);
  }
  return history;
}

Metrics compute_metrics(std::span<const int> predictions, std::span<const int> labels,
                        int num_classes) {
  if (labels.empty()) throw ConfigError("metrics: no labeled samples");
  if (predictions.size() != labels.size()) {
    throw ShapeError("metrics: prediction/label counts differ");
  }
  Metrics m;
  m.n = static_cast<std::int64_t>(labels.size());
  m.confusion.assign(static_cast<size_t>(num_classes),
                     std::vector<std::int64_t>(static_cast<size_t>(num_classes), 0));
  std::int64_t correct_total = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    m.confusion[static_cast<size_t>(labels[i])][static_cast<size_t>(predictions[i])] += 1;
    if (predictions[i] == labels[i]) ++correct_total;
  }
  m.per_class_acc.assign(static_cast<size_t>(num_classes), std::nullopt);
  double acc_sum = 0.0;
  int non_empty = 0;
  for (int e = 0; e < num_classes; ++e) {
    std::int64_t row_total = 0;
    for (std::int64_t v : m.confusion[static_cast<size_t>(e)]) row_total += v;
    if (row_total == 0) continue;  // class absent from data: excluded from the average
    const double acc = 100.0 *
                       static_cast<double>(m.confusion[static_cast<size_t>(e)][static_cast<size_t>(e)]) /
                       static_cast<double>(row_total);
    m.per_class_acc[static_cast<size_t>(e)] = acc;
    acc_sum += acc;
    ++non_empty;
  }
  m.average_acc = acc_sum / non_empty;
  m.overall_acc = 100.0 * static_cast<double>(correct_total) / static_cast<double>(m.n);
  return m;
}

Metrics evaluate(const ModelState& state, const Dataset& data) {
  if (data.samples.empty()) throw ConfigError("evaluate: dataset is empty");
  const int e_count = state.config().num_expressions;
  std::vector<int> predictions, labels;
  predictions.reserve(data.samples.size());
  labels.reserve(data.samples.size());
  for (const SynthSample& sample : data.samples) {
    ForwardResult r = forward(sample.x, state);
    int best = 0;
    for (int e = 1; e < e_count; ++e) {
      if (r.p_e(e) > r.p_e(best)) best = e;  // ties keep the lowest index
    }
    predictions.push_back(best);
    labels.push_back(sample.label);
  }
  return compute_metrics(predictions, labels, e_count);
}

}  // namespace auecrl
