#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "auecrl/gradcheck.hpp"
#include "auecrl/graph.hpp"
#include "auecrl/knowledge.hpp"
#include "auecrl/param.hpp"
#include "auecrl/tensor.hpp"

namespace auecrl {

enum class AttentionNorm : std::uint8_t { kSoftmax, kRatio };

struct ModelConfig {
  int input_dim = 32;
  int d_e = 32;  // global expression feature dim
  int d_a = 16;  // per-AU feature dim
  int d = 16;    // low-rank bilinear dim
  int num_expressions = 7;
  int num_aus = 12;
  bool use_biases = true;  // affine AU scores / expression head; false = strict linear form
  AttentionNorm attention_norm = AttentionNorm::kSoftmax;

  void validate() const;  // throws ConfigError
};

struct FeatureSet {
  Tensor f_e;                // [d_e]
  std::vector<Tensor> f_a;   // A tensors of shape [d_a]
};

struct AttentionParamsView {
  const Tensor& u;  // [d_e x d]
  const Tensor& v;  // [d_a x d]
  const Tensor& p;  // [d]
  const Tensor& b;  // [d]
};

struct AttentionWeights {
  Tensor logits;      // [A]
  Tensor normalized;  // [A], nonnegative, sums to 1 under softmax
};

// All learnable parameters. Parameter iteration order is fixed, which pins
// initialization, update order and checkpoint layout.
class ModelState {
 public:
  ModelState(const ModelConfig& config, const PriorMatrix& prior, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  Param& encoder_w() { return params_[0]; }
  Param& encoder_b() { return params_[1]; }
  Param& au_encoder_w(int i) { return params_[2 + 2 * static_cast<size_t>(i)]; }
  Param& au_encoder_b(int i) { return params_[3 + 2 * static_cast<size_t>(i)]; }
  Param& w_ea() { return params_[w_ea_index_]; }
  Param& au_cls_w(int i) { return params_[w_ea_index_ + 1 + 2 * static_cast<size_t>(i)]; }
  Param& au_cls_b(int i) { return params_[w_ea_index_ + 2 + 2 * static_cast<size_t>(i)]; }
  Param& attn_u() { return params_[attn_index_]; }
  Param& attn_v() { return params_[attn_index_ + 1]; }
  Param& attn_p() { return params_[attn_index_ + 2]; }
  Param& attn_b() { return params_[attn_index_ + 3]; }
  Param& head_w() { return params_[attn_index_ + 4]; }
  Param& head_b() { return params_[attn_index_ + 5]; }

  const Param& encoder_w() const { return params_[0]; }
  const Param& encoder_b() const { return params_[1]; }
  const Param& au_encoder_w(int i) const { return params_[2 + 2 * static_cast<size_t>(i)]; }
  const Param& au_encoder_b(int i) const { return params_[3 + 2 * static_cast<size_t>(i)]; }
  const Param& w_ea() const { return params_[w_ea_index_]; }
  const Param& au_cls_w(int i) const { return params_[w_ea_index_ + 1 + 2 * static_cast<size_t>(i)]; }
  const Param& au_cls_b(int i) const { return params_[w_ea_index_ + 2 + 2 * static_cast<size_t>(i)]; }
  const Param& attn_u() const { return params_[attn_index_]; }
  const Param& attn_v() const { return params_[attn_index_ + 1]; }
  const Param& attn_p() const { return params_[attn_index_ + 2]; }
  const Param& attn_b() const { return params_[attn_index_ + 3]; }
  const Param& head_w() const { return params_[attn_index_ + 4]; }
  const Param& head_b() const { return params_[attn_index_ + 5]; }

  const Param& param(size_t i) const { return params_[i]; }
  Param& param(size_t i) { return params_[i]; }
  size_t param_count() const { return params_.size(); }
  size_t w_ea_param_index() const { return w_ea_index_; }
  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  Param* find(const std::string& name);

  // Marks the stage's trainable groups unfrozen and freezes everything else:
  // stage 1: encoder + expression head, stage 2: AU branch (per-AU encoders,
  // AU classifiers, W_EA), stage 3: attention + expression head.
  void apply_stage_freeze(int stage);

 private:
  ModelConfig config_;
  std::vector<Param> params_;
  size_t w_ea_index_ = 0;
  size_t attn_index_ = 0;
};

// --- plain forward path -----------------------------------------------------

FeatureSet encode(const Tensor& sample, const ModelState& state);

// p_e . W_EA  (Eq-1-style pseudo AU labels from an expression distribution)
Tensor pseudo_labels(const Tensor& p_e, const Tensor& w_ea);

// Raw linear AU scores w_i . f_a_i (+ bias when enabled).
Tensor predict_au(const FeatureSet& features, const ModelState& state);

// Low-rank bilinear logits  P^T(tanh(U^T f_e) (*) tanh(V^T f_a_i) + b).
Tensor attention_logits(const Tensor& f_e, std::span<const Tensor> f_a,
                        const AttentionParamsView& params);

AttentionWeights normalize_attention(const Tensor& logits,
                                     AttentionNorm norm = AttentionNorm::kSoftmax);

// sum_i w_i f_a_i over normalized weights.
Tensor fuse_au(const AttentionWeights& weights, std::span<const Tensor> f_a);

// softmax(head . [f_fused, f_e] + bias), concatenation order AU-then-global.
Tensor predict_expression(const Tensor& f_fused, const Tensor& f_e,
                          const Tensor& head_w, const Tensor& head_b,
                          bool use_bias = true);

struct ForwardResult {
  FeatureSet features;
  Tensor p_a;
  AttentionWeights attention;
  Tensor fused;
  Tensor p_e;
};

ForwardResult forward(const Tensor& sample, const ModelState& state);

// --- graph (autodiff) route -------------------------------------------------

// One leaf per parameter, in registry order; frozen params become constants.
struct StateBinding {
  std::vector<NodeRef> leaves;
};

StateBinding bind_state(Graph& g, const ModelState& state, bool freeze_all = false);

// Copies leaf gradients into Param::gradient (zeros for frozen params).
void collect_gradients(const Graph& g, const StateBinding& binding, ModelState& state);

struct SampleNodes {
  NodeRef f_e;
  std::vector<NodeRef> f_a;
  NodeRef p_a;           // [A]
  NodeRef attn_logits;   // [A]
  NodeRef attn_weights;  // [A]
  NodeRef fused;         // [d_a]
  NodeRef p_e;           // [E]
};

SampleNodes build_sample_forward(Graph& g, const StateBinding& binding,
                                 const ModelState& state, const Tensor& sample);

// Finite-difference check over the state's parameters; frozen params are
// excluded from the report.
GradCheckReport check_state_gradients(Graph& g, NodeRef root, const StateBinding& binding,
                                      const ModelState& state, double h, double tol);

}  // namespace auecrl
