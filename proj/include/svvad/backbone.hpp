#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "svvad/features.hpp"
#include "svvad/spk_encoder.hpp"
#include "svvad/tensor.hpp"

namespace svvad {

struct BackboneConfig {
  size_t feat_dim = 80;        // F; frames come in and leave at this width
  size_t conformer_dim = 256;  // internal conformer width; in/out projections
                               // are added when it differs from feat_dim
  size_t n_conf = 4;
  size_t n_trans = 3;
  size_t ffn_dim = 256;
  size_t n_heads = 4;
  size_t conv_kernel = 15;     // depthwise kernel, odd
  size_t embed_dim = 192;      // E
  size_t embed_reduced = 64;   // E'
  bool gamma_sigmoid = false;  // bound gamma to (0,1) for visualization runs

  size_t fused_dim() const { return embed_reduced + feat_dim; }

  static BackboneConfig paper();
  // Small enough to train in minutes on one core.
  static BackboneConfig desk();
};

// Per-frame soft gate: x_gated[t, f] = gamma[t] * x[t, f] + beta[t].
struct VadDecision {
  std::vector<double> gamma;
  std::vector<double> beta;
};

namespace nn {

struct Linear {
  Tensor w;  // in x out
  Tensor b;  // 1 x out
  static Linear create(ParameterStore& ps, const std::string& name, size_t in,
                       size_t out, double bias_init = 0.0,
                       double weight_scale = 1.0);
  Tensor forward(const Tensor& x) const { return add(matmul(x, w), b); }
};

struct LayerNorm {
  Tensor gain, bias;
  static LayerNorm create(ParameterStore& ps, const std::string& name,
                          size_t dim);
  Tensor forward(const Tensor& x) const {
    return layer_norm_rows(x, gain, bias);
  }
};

struct MultiHeadAttention {
  Linear q, k, v, o;
  size_t heads = 1;
  size_t dim = 0;
  static MultiHeadAttention create(ParameterStore& ps, const std::string& name,
                                   size_t dim, size_t heads);
  Tensor forward(const Tensor& x) const;
};

// Pre-norm feed-forward: LN -> Linear -> activation -> Linear.
struct FeedForward {
  LayerNorm ln;
  Linear a, b;
  bool use_silu = true;
  static FeedForward create(ParameterStore& ps, const std::string& name,
                            size_t dim, size_t hidden, bool use_silu);
  Tensor forward(const Tensor& x) const;
};

// Macaron conformer block: half-step FFN, self-attention, depthwise-conv
// module, half-step FFN. Every branch has a learnable scalar scale so the
// block reduces to the identity when the scales are zeroed.
struct ConformerLayer {
  FeedForward ffn1, ffn2;
  LayerNorm attn_ln;
  MultiHeadAttention mha;
  LayerNorm conv_ln;
  Linear conv_pw1;  // dim -> 2*dim, split for GLU
  Tensor conv_dw;   // kernel x dim
  LayerNorm conv_mid_ln;
  Linear conv_pw2;
  Tensor s_ffn1, s_attn, s_conv, s_ffn2;
  static ConformerLayer create(ParameterStore& ps, const std::string& name,
                               const BackboneConfig& cfg);
  Tensor forward(const Tensor& x) const;
};

struct TransformerLayer {
  LayerNorm attn_ln;
  MultiHeadAttention mha;
  FeedForward ffn;
  Tensor s_attn, s_ffn;
  static TransformerLayer create(ParameterStore& ps, const std::string& name,
                                 size_t dim, size_t ffn_dim, size_t heads);
  Tensor forward(const Tensor& x) const;
};

}  // namespace nn

// Conformer feature branch plus embedding-conditioned transformer fusion;
// shared between the soft-gate model and the frame-classifier baseline.
class SvvadTrunk {
 public:
  SvvadTrunk(const BackboneConfig& cfg, ParameterStore& ps,
             const std::string& prefix);

  // T x F -> T x F; the time dimension is never subsampled.
  Tensor conformer_forward(const Tensor& x) const;
  // (T x F, 1 x E) -> T x (E' + F)
  Tensor fuse(const Tensor& x_conf, const Tensor& v_enr) const;
  Tensor forward(const Tensor& x, const Tensor& v_enr) const;

  const BackboneConfig& config() const { return cfg_; }

 private:
  BackboneConfig cfg_;
  bool has_adapters_;
  nn::Linear in_proj_, out_proj_;
  std::vector<nn::ConformerLayer> conf_layers_;
  nn::Linear embed_reduce_;
  std::vector<nn::TransformerLayer> trans_layers_;
};

class SvvadModel {
 public:
  SvvadModel(BackboneConfig cfg, uint64_t param_seed);

  const BackboneConfig& config() const { return cfg_; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }

  Tensor conformer_forward(const Tensor& x) const {
    return trunk_->conformer_forward(x);
  }
  Tensor fuse(const Tensor& x_conf, const Tensor& v_enr) const {
    return trunk_->fuse(x_conf, v_enr);
  }
  // (gamma, beta), each T x 1.
  std::pair<Tensor, Tensor> film_heads(const Tensor& z) const;
  // x_gated = gamma * x + beta, broadcast across the feature axis and applied
  // to the original features.
  static Tensor film_apply(const Tensor& gamma, const Tensor& beta,
                           const Tensor& x);

  struct Output {
    Tensor gamma, beta, gated;
  };
  Output forward(const Tensor& x, const Tensor& v_enr) const;

  VadDecision decide(const FeatureMatrix& feats, const Embedding& enroll) const;

 private:
  BackboneConfig cfg_;
  ParameterStore store_;
  std::unique_ptr<SvvadTrunk> trunk_;
  nn::Linear gamma_head_, beta_head_;
};

}  // namespace svvad
