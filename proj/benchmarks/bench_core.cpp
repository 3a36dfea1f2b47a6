#include <benchmark/benchmark.h>

#include <random>

#include "auecrl/gradcheck.hpp"
#include "auecrl/knowledge.hpp"
#include "auecrl/losses.hpp"
#include "auecrl/model.hpp"
#include "auecrl/synthdata.hpp"
#include "auecrl/training.hpp"

using namespace auecrl;

namespace {

struct Bench {
  KnowledgeBase kb = KnowledgeBase::builtin_default();
  PriorMatrix prior = prior_matrix(kb, kb.levels());
  ModelConfig cfg;
  Dataset data;

  explicit Bench(std::int64_t n = 256) {
    GenConfig gen;
    gen.n_samples = n;
    gen.seed = 7;
    data = generate(gen, kb, prior);
  }
};

}  // namespace

static void ForwardPass(benchmark::State& state) {
  Bench b(64);
  ModelState model(b.cfg, b.prior, 7);
  size_t i = 0;
  for (auto _ : state) {
    ForwardResult r = forward(b.data.samples[i % b.data.samples.size()].x, model);
    benchmark::DoNotOptimize(r.p_e);
    ++i;
  }
}
BENCHMARK(ForwardPass);

static void BatchGradientStep(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  Bench b(batch);
  ModelState model(b.cfg, b.prior, 7);
  model.apply_stage_freeze(3);
  TrainContext ctx{b.prior.values, b.kb.positive_pairs(), b.kb.negative_pairs(), 1.0, 0.5};
  for (auto _ : state) {
    Graph g;
    StateBinding binding = bind_state(g, model);
    std::vector<NodeRef> p_e_rows, logit_rows;
    std::vector<int> labels;
    for (int k = 0; k < batch; ++k) {
      SampleNodes nodes = build_sample_forward(g, binding, model, b.data.samples[static_cast<size_t>(k)].x);
      p_e_rows.push_back(nodes.p_e);
      logit_rows.push_back(nodes.attn_logits);
      labels.push_back(b.data.samples[static_cast<size_t>(k)].label);
    }
    NodeRef l_c = build_cross_entropy(g, p_e_rows, labels, b.cfg.num_expressions);
    PairRegularizerNodes reg =
        build_pair_regularizers(g, logit_rows, ctx.positive_pairs, ctx.negative_pairs);
    NodeRef l_e = g.add(l_c, g.scale(g.add(reg.l_p, reg.l_n), ctx.alpha));
    g.backward(l_e);
    collect_gradients(g, binding, model);
    benchmark::DoNotOptimize(model.attn_u().gradient);
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BatchGradientStep)->Arg(8)->Arg(32);

static void TrainEpoch(benchmark::State& state) {
  Bench b(256);
  ModelState model(b.cfg, b.prior, 7);
  TrainContext ctx{b.prior.values, b.kb.positive_pairs(), b.kb.negative_pairs(), 1.0, 0.5};
  StagePlan plan = StagePlan::defaults(1);
  plan.epochs = 1;
  for (auto _ : state) {
    LossHistory h = run_stage(plan, model, b.data, ctx, 7);
    benchmark::DoNotOptimize(h);
  }
  state.SetItemsProcessed(state.iterations() * b.data.size());
}
BENCHMARK(TrainEpoch);

static void DatasetGeneration(benchmark::State& state) {
  Bench b(1);
  GenConfig gen;
  gen.n_samples = state.range(0);
  gen.seed = 11;
  for (auto _ : state) {
    Dataset d = generate(gen, b.kb, b.prior);
    benchmark::DoNotOptimize(d);
  }
  state.SetItemsProcessed(state.iterations() * gen.n_samples);
}
BENCHMARK(DatasetGeneration)->Arg(1000);

static void FiniteDifferenceCheck(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (auto _ : state) {
    Graph g;
    Tensor x0 = Tensor::zeros({24});
    for (double& v : x0.values()) v = dist(rng);
    NodeRef x = g.leaf("x", x0);
    NodeRef root = g.squared_error(g.tanh(x), g.constant(Tensor::zeros({24})));
    std::array wrt{x};
    GradCheckReport report = finite_difference_check(g, root, wrt, 1e-5, 1e-4);
    benchmark::DoNotOptimize(report);
  }
}
BENCHMARK(FiniteDifferenceCheck);

BENCHMARK_MAIN();
