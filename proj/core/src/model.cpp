#include "auecrl/model.hpp"

#include <array>
#include <cmath>
#include <random>
#include <sstream>

#include "auecrl/errors.hpp"
#include "auecrl/math.hpp"

namespace auecrl {

namespace {

// Attention logits should start with enough spread that the co-occurrence
// statistics are informative from the first stage-3 batch.
constexpr double kAttentionInitGain = 4.0;

void check_dim(const char* what, int v) {
  if (v <= 0) throw ConfigError(std::string(what) + " must be positive");
}

Tensor uniform_init(std::mt19937_64& rng, std::vector<std::int64_t> shape, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.values()) v = dist(rng);
  return t;
}

}  // namespace

void ModelConfig::validate() const {
  check_dim("input_dim", input_dim);
  check_dim("d_e", d_e);
  check_dim("d_a", d_a);
  check_dim("d", d);
  if (num_expressions < 2) throw ConfigError("num_expressions must be at least 2");
  if (num_aus < 2) throw ConfigError("num_aus must be at least 2");
}

ModelState::ModelState(const ModelConfig& config, const PriorMatrix& prior,
                       std::uint64_t seed)
    : config_(config) {
  config_.validate();
  const int a_count = config_.num_aus;
  const int e_count = config_.num_expressions;
  if (prior.values.rank() != 2 || prior.values.dim(0) != e_count ||
      prior.values.dim(1) != a_count) {
    throw ShapeError("prior matrix shape " + prior.values.shape_str() +
                     " does not match config (" + std::to_string(e_count) + "x" +
                     std::to_string(a_count) + ")");
  }

  std::mt19937_64 rng(seed);
  const double enc_bound = 1.0 / std::sqrt(static_cast<double>(config_.input_dim));

  params_.emplace_back("encoder.w", uniform_init(rng, {config_.d_e, config_.input_dim}, enc_bound));
  params_.emplace_back("encoder.b", Tensor::zeros({config_.d_e}));
  for (int i = 0; i < a_count; ++i) {
    params_.emplace_back("au_encoder." + std::to_string(i) + ".w",
                         uniform_init(rng, {config_.d_a, config_.input_dim}, enc_bound));
    params_.emplace_back("au_encoder." + std::to_string(i) + ".b",
                         Tensor::zeros({config_.d_a}));
  }

  w_ea_index_ = params_.size();
  params_.emplace_back("w_ea", prior.values);  // start at the knowledge prior
  params_.back().clamp01 = true;

  const double cls_bound = 1.0 / std::sqrt(static_cast<double>(config_.d_a));
  for (int i = 0; i < a_count; ++i) {
    params_.emplace_back("au_cls." + std::to_string(i) + ".w",
                         uniform_init(rng, {config_.d_a}, cls_bound));
    params_.emplace_back("au_cls." + std::to_string(i) + ".b", Tensor::scalar(0.0));
  }

  attn_index_ = params_.size();
  params_.emplace_back("attention.u",
                       uniform_init(rng, {config_.d_e, config_.d},
                                    kAttentionInitGain / std::sqrt(static_cast<double>(config_.d_e))));
  params_.emplace_back("attention.v",
                       uniform_init(rng, {config_.d_a, config_.d},
                                    kAttentionInitGain / std::sqrt(static_cast<double>(config_.d_a))));
  params_.emplace_back("attention.p",
                       uniform_init(rng, {config_.d},
                                    kAttentionInitGain / std::sqrt(static_cast<double>(config_.d))));
  params_.emplace_back("attention.b", Tensor::zeros({config_.d}));

  const double head_bound = 1.0 / std::sqrt(static_cast<double>(config_.d_a + config_.d_e));
  params_.emplace_back("expr_head.w",
                       uniform_init(rng, {e_count, config_.d_a + config_.d_e}, head_bound));
  params_.emplace_back("expr_head.b", Tensor::zeros({e_count}));

  if (!config_.use_biases) {
    for (int i = 0; i < a_count; ++i) au_cls_b(i).frozen = true;
    head_b().frozen = true;
  }
}

Param* ModelState::find(const std::string& name) {
  for (Param& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

void ModelState::apply_stage_freeze(int stage) {
  if (stage < 1 || stage > 3) {
    throw ConfigError("stage must be 1, 2 or 3, got " + std::to_string(stage));
  }
  for (Param& p : params_) p.frozen = true;
  const int a_count = config_.num_aus;
  switch (stage) {
    case 1:
      encoder_w().frozen = false;
      encoder_b().frozen = false;
      head_w().frozen = false;
      head_b().frozen = false;
      break;
    case 2:
      for (int i = 0; i < a_count; ++i) {
        au_encoder_w(i).frozen = false;
        au_encoder_b(i).frozen = false;
        au_cls_w(i).frozen = false;
        au_cls_b(i).frozen = false;
      }
      w_ea().frozen = false;
      break;
    case 3:
      attn_u().frozen = false;
      attn_v().frozen = false;
      attn_p().frozen = false;
      attn_b().frozen = false;
      head_w().frozen = false;
      head_b().frozen = false;
      break;
  }
  if (!config_.use_biases) {
    for (int i = 0; i < a_count; ++i) au_cls_b(i).frozen = true;
    head_b().frozen = true;
  }
}

// --- plain forward path -----------------------------------------------------

namespace {

Tensor affine_tanh(const Tensor& w, const Tensor& b, const Tensor& x) {
  Tensor h = math::matvec(w, x);
  for (std::int64_t i = 0; i < h.size(); ++i) h(i) = std::tanh(h(i) + b(i));
  return h;
}

}  // namespace

FeatureSet encode(const Tensor& sample, const ModelState& state) {
  const ModelConfig& cfg = state.config();
  if (sample.rank() != 1 || sample.dim(0) != cfg.input_dim) {
    throw ShapeError("sample shape " + sample.shape_str() + " does not match input_dim " +
                     std::to_string(cfg.input_dim));
  }
  FeatureSet out;
  out.f_e = affine_tanh(state.encoder_w().value, state.encoder_b().value, sample);
  out.f_a.reserve(static_cast<size_t>(cfg.num_aus));
  for (int i = 0; i < cfg.num_aus; ++i) {
    out.f_a.push_back(affine_tanh(state.au_encoder_w(i).value,
                                  state.au_encoder_b(i).value, sample));
  }
  return out;
}

Tensor pseudo_labels(const Tensor& p_e, const Tensor& w_ea) {
  return math::vecmat(p_e, w_ea);
}

Tensor predict_au(const FeatureSet& features, const ModelState& state) {
  const int a_count = state.config().num_aus;
  if (static_cast<int>(features.f_a.size()) != a_count) {
    throw ShapeError("feature set has " + std::to_string(features.f_a.size()) +
                     " AU features, expected " + std::to_string(a_count));
  }
  Tensor p_a = Tensor::zeros({a_count});
  for (int i = 0; i < a_count; ++i) {
    p_a(i) = math::dot(state.au_cls_w(i).value, features.f_a[static_cast<size_t>(i)]) +
             state.au_cls_b(i).value.as_scalar();
  }
  return p_a;
}

Tensor attention_logits(const Tensor& f_e, std::span<const Tensor> f_a,
                        const AttentionParamsView& params) {
  Tensor t_e = math::vecmat(f_e, params.u);
  for (double& v : t_e.values()) v = std::tanh(v);
  Tensor logits = Tensor::zeros({static_cast<std::int64_t>(f_a.size())});
  for (size_t i = 0; i < f_a.size(); ++i) {
    Tensor m = math::vecmat(f_a[i], params.v);
    for (std::int64_t k = 0; k < m.size(); ++k) {
      m(k) = t_e(k) * std::tanh(m(k)) + params.b(k);
    }
    logits(static_cast<std::int64_t>(i)) = math::dot(params.p, m);
  }
  return logits;
}

AttentionWeights normalize_attention(const Tensor& logits, AttentionNorm norm) {
  if (logits.rank() != 1) throw ShapeError("attention logits must be rank-1");
  AttentionWeights out;
  out.logits = logits;
  if (norm == AttentionNorm::kSoftmax) {
    out.normalized = math::softmax(logits);
  } else {
    double s = 0.0;
    for (double v : logits.values()) s += v;
    if (s <= 0.0) {
      throw NumericsError("ratio attention normalization requires a positive coefficient sum");
    }
    out.normalized = logits;
    for (double& v : out.normalized.values()) v /= s;
  }
  return out;
}

Tensor fuse_au(const AttentionWeights& weights, std::span<const Tensor> f_a) {
  if (weights.normalized.size() != static_cast<std::int64_t>(f_a.size())) {
    throw ShapeError("attention weights and AU feature counts differ");
  }
  if (f_a.empty()) throw ShapeError("fuse_au: no AU features");
  Tensor fused = Tensor::zeros({f_a[0].size()});
  for (std::int64_t r = 0; r < fused.size(); ++r) {
    double acc = 0.0;
    for (size_t i = 0; i < f_a.size(); ++i) {
      acc += f_a[i](r) * weights.normalized(static_cast<std::int64_t>(i));
    }
    fused(r) = acc;
  }
  return fused;
}

Tensor predict_expression(const Tensor& f_fused, const Tensor& f_e,
                          const Tensor& head_w, const Tensor& head_b, bool use_bias) {
  Tensor cat = Tensor::zeros({f_fused.size() + f_e.size()});
  std::int64_t off = 0;
  for (std::int64_t i = 0; i < f_fused.size(); ++i) cat(off++) = f_fused(i);
  for (std::int64_t i = 0; i < f_e.size(); ++i) cat(off++) = f_e(i);
  Tensor scores = math::matvec(head_w, cat);
  if (use_bias) {
    for (std::int64_t i = 0; i < scores.size(); ++i) scores(i) += head_b(i);
  }
  math::softmax_inplace(scores);
  return scores;
}

ForwardResult forward(const Tensor& sample, const ModelState& state) {
  ForwardResult r;
  r.features = encode(sample, state);
  r.p_a = predict_au(r.features, state);
  AttentionParamsView attn{state.attn_u().value, state.attn_v().value,
                           state.attn_p().value, state.attn_b().value};
  Tensor logits = attention_logits(r.features.f_e, r.features.f_a, attn);
  r.attention = normalize_attention(logits, state.config().attention_norm);
  r.fused = fuse_au(r.attention, r.features.f_a);
  r.p_e = predict_expression(r.fused, r.features.f_e, state.head_w().value,
                             state.head_b().value, true);
  return r;
}

// --- graph (autodiff) route -------------------------------------------------

StateBinding bind_state(Graph& g, const ModelState& state, bool freeze_all) {
  StateBinding binding;
  binding.leaves.reserve(state.param_count());
  for (size_t i = 0; i < state.param_count(); ++i) {
    const Param& p = state.param(i);
    binding.leaves.push_back(g.leaf(p.name, p.value, !freeze_all && !p.frozen));
  }
  return binding;
}

void collect_gradients(const Graph& g, const StateBinding& binding, ModelState& state) {
  for (size_t i = 0; i < state.param_count(); ++i) {
    Param& p = state.param(i);
    if (g.requires_grad(binding.leaves[i])) {
      p.gradient = g.grad(binding.leaves[i]);
    } else {
      p.zero_gradient();
    }
  }
}

GradCheckReport check_state_gradients(Graph& g, NodeRef root, const StateBinding& binding,
                                      const ModelState& state, double h, double tol) {
  std::vector<NodeRef> wrt;
  for (size_t i = 0; i < state.param_count(); ++i) {
    if (!state.param(i).frozen) wrt.push_back(binding.leaves[i]);
  }
  return finite_difference_check(g, root, wrt, h, tol);
}

SampleNodes build_sample_forward(Graph& g, const StateBinding& binding,
                                 const ModelState& state, const Tensor& sample) {
  const ModelConfig& cfg = state.config();
  if (sample.rank() != 1 || sample.dim(0) != cfg.input_dim) {
    throw ShapeError("sample shape " + sample.shape_str() + " does not match input_dim " +
                     std::to_string(cfg.input_dim));
  }
  // Binding indices mirror the ModelState registry layout.
  const size_t w_ea_at = 2 + 2 * static_cast<size_t>(cfg.num_aus);
  const size_t attn_at = w_ea_at + 1 + 2 * static_cast<size_t>(cfg.num_aus);
  auto lf = [&](size_t i) { return binding.leaves[i]; };

  SampleNodes out;
  NodeRef x = g.constant(sample);
  out.f_e = g.tanh(g.add(g.matvec(lf(0), x), lf(1)));
  out.f_a.reserve(static_cast<size_t>(cfg.num_aus));
  for (int i = 0; i < cfg.num_aus; ++i) {
    out.f_a.push_back(g.tanh(g.add(
        g.matvec(lf(2 + 2 * static_cast<size_t>(i)), x),
        lf(3 + 2 * static_cast<size_t>(i)))));
  }

  std::vector<NodeRef> au_scores;
  au_scores.reserve(static_cast<size_t>(cfg.num_aus));
  for (int i = 0; i < cfg.num_aus; ++i) {
    NodeRef score = g.dot(lf(w_ea_at + 1 + 2 * static_cast<size_t>(i)),
                          out.f_a[static_cast<size_t>(i)]);
    au_scores.push_back(g.add(score, lf(w_ea_at + 2 + 2 * static_cast<size_t>(i))));
  }
  out.p_a = g.concat(au_scores);

  NodeRef t_e = g.tanh(g.vecmat(out.f_e, lf(attn_at)));
  std::vector<NodeRef> logit_parts;
  logit_parts.reserve(static_cast<size_t>(cfg.num_aus));
  for (int i = 0; i < cfg.num_aus; ++i) {
    NodeRef t_a = g.tanh(g.vecmat(out.f_a[static_cast<size_t>(i)], lf(attn_at + 1)));
    NodeRef m = g.add(g.hadamard(t_e, t_a), lf(attn_at + 3));
    logit_parts.push_back(g.dot(lf(attn_at + 2), m));
  }
  out.attn_logits = g.concat(logit_parts);
  out.attn_weights = cfg.attention_norm == AttentionNorm::kSoftmax
                         ? g.softmax(out.attn_logits)
                         : g.ratio_normalize(out.attn_logits);

  out.fused = g.matvec(g.stack_cols(out.f_a), out.attn_weights);

  std::array<NodeRef, 2> cat_parts{out.fused, out.f_e};
  NodeRef cat = g.concat(cat_parts);
  NodeRef scores = g.add(g.matvec(lf(attn_at + 4), cat), lf(attn_at + 5));
  out.p_e = g.softmax(scores);
  return out;
}

}  // namespace auecrl
