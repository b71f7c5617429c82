#include "svvad/backbone.hpp"

#include <cmath>
#include <stdexcept>

namespace svvad {

BackboneConfig BackboneConfig::paper() { return BackboneConfig{}; }

BackboneConfig BackboneConfig::desk() {
  BackboneConfig cfg;
  cfg.feat_dim = 40;
  cfg.conformer_dim = 40;
  cfg.n_conf = 2;
  cfg.n_trans = 2;
  cfg.ffn_dim = 64;
  cfg.n_heads = 2;
  cfg.conv_kernel = 7;
  cfg.embed_dim = 32;
  cfg.embed_reduced = 16;
  return cfg;
}

namespace nn {

Linear Linear::create(ParameterStore& ps, const std::string& name, size_t in,
                      size_t out, double bias_init, double weight_scale) {
  Linear l;
  l.w = ps.create_glorot(name + ".w", in, out, in, out);
  if (weight_scale != 1.0)
    for (double& v : l.w.mutable_values()) v *= weight_scale;
  l.b = ps.create_constant(name + ".b", 1, out, bias_init);
  return l;
}

LayerNorm LayerNorm::create(ParameterStore& ps, const std::string& name,
                            size_t dim) {
  LayerNorm ln;
  ln.gain = ps.create_constant(name + ".gain", 1, dim, 1.0);
  ln.bias = ps.create_constant(name + ".bias", 1, dim, 0.0);
  return ln;
}

MultiHeadAttention MultiHeadAttention::create(ParameterStore& ps,
                                              const std::string& name,
                                              size_t dim, size_t heads) {
  if (heads == 0 || dim % heads != 0)
    throw std::invalid_argument("svvad: attention dim " + std::to_string(dim) +
                                " not divisible by heads " +
                                std::to_string(heads));
  MultiHeadAttention m;
  m.heads = heads;
  m.dim = dim;
  m.q = Linear::create(ps, name + ".q", dim, dim);
  m.k = Linear::create(ps, name + ".k", dim, dim);
  m.v = Linear::create(ps, name + ".v", dim, dim);
  m.o = Linear::create(ps, name + ".o", dim, dim);
  return m;
}

Tensor MultiHeadAttention::forward(const Tensor& x) const {
  const size_t dh = dim / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor qx = q.forward(x), kx = k.forward(x), vx = v.forward(x);
  Tensor out;
  for (size_t h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(qx, h * dh, dh);
    Tensor kh = slice_cols(kx, h * dh, dh);
    Tensor vh = slice_cols(vx, h * dh, dh);
    Tensor attn = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt));
    Tensor oh = matmul(attn, vh);
    out = h == 0 ? oh : concat_cols(out, oh);
  }
  return o.forward(out);
}

FeedForward FeedForward::create(ParameterStore& ps, const std::string& name,
                                size_t dim, size_t hidden, bool use_silu) {
  FeedForward f;
  f.ln = LayerNorm::create(ps, name + ".ln", dim);
  f.a = Linear::create(ps, name + ".a", dim, hidden);
  f.b = Linear::create(ps, name + ".b", hidden, dim);
  f.use_silu = use_silu;
  return f;
}

Tensor FeedForward::forward(const Tensor& x) const {
  Tensor h = a.forward(ln.forward(x));
  h = use_silu ? silu(h) : relu(h);
  return b.forward(h);
}

ConformerLayer ConformerLayer::create(ParameterStore& ps,
                                      const std::string& name,
                                      const BackboneConfig& cfg) {
  const size_t d = cfg.conformer_dim;
  ConformerLayer l;
  l.ffn1 = FeedForward::create(ps, name + ".ffn1", d, cfg.ffn_dim, true);
  l.attn_ln = LayerNorm::create(ps, name + ".attn_ln", d);
  l.mha = MultiHeadAttention::create(ps, name + ".mha", d, cfg.n_heads);
  l.conv_ln = LayerNorm::create(ps, name + ".conv_ln", d);
  l.conv_pw1 = Linear::create(ps, name + ".conv_pw1", d, 2 * d);
  l.conv_dw = ps.create_glorot(name + ".conv_dw", cfg.conv_kernel, d,
                               cfg.conv_kernel, cfg.conv_kernel);
  l.conv_mid_ln = LayerNorm::create(ps, name + ".conv_mid_ln", d);
  l.conv_pw2 = Linear::create(ps, name + ".conv_pw2", d, d);
  l.ffn2 = FeedForward::create(ps, name + ".ffn2", d, cfg.ffn_dim, true);
  l.s_ffn1 = ps.create_constant(name + ".s_ffn1", 1, 1, 1.0);
  l.s_attn = ps.create_constant(name + ".s_attn", 1, 1, 1.0);
  l.s_conv = ps.create_constant(name + ".s_conv", 1, 1, 1.0);
  l.s_ffn2 = ps.create_constant(name + ".s_ffn2", 1, 1, 1.0);
  return l;
}

Tensor ConformerLayer::forward(const Tensor& x0) const {
  const size_t d = conv_pw2.w.rows();
  Tensor x = add(x0, mul(s_ffn1, scale(ffn1.forward(x0), 0.5)));
  x = add(x, mul(s_attn, mha.forward(attn_ln.forward(x))));
  {
    Tensor h = conv_pw1.forward(conv_ln.forward(x));
    Tensor glu = mul(slice_cols(h, 0, d), sigmoid(slice_cols(h, d, d)));
    Tensor c = depthwise_conv1d(glu, conv_dw);
    c = conv_pw2.forward(silu(conv_mid_ln.forward(c)));
    x = add(x, mul(s_conv, c));
  }
  x = add(x, mul(s_ffn2, scale(ffn2.forward(x), 0.5)));
  return x;
}

TransformerLayer TransformerLayer::create(ParameterStore& ps,
                                          const std::string& name, size_t dim,
                                          size_t ffn_dim, size_t heads) {
  TransformerLayer l;
  l.attn_ln = LayerNorm::create(ps, name + ".attn_ln", dim);
  l.mha = MultiHeadAttention::create(ps, name + ".mha", dim, heads);
  l.ffn = FeedForward::create(ps, name + ".ffn", dim, ffn_dim, false);
  l.s_attn = ps.create_constant(name + ".s_attn", 1, 1, 1.0);
  l.s_ffn = ps.create_constant(name + ".s_ffn", 1, 1, 1.0);
  return l;
}

Tensor TransformerLayer::forward(const Tensor& x0) const {
  Tensor x = add(x0, mul(s_attn, mha.forward(attn_ln.forward(x0))));
  return add(x, mul(s_ffn, ffn.forward(x)));
}

}  // namespace nn

SvvadTrunk::SvvadTrunk(const BackboneConfig& cfg, ParameterStore& ps,
                       const std::string& prefix)
    : cfg_(cfg), has_adapters_(cfg.conformer_dim != cfg.feat_dim) {
  if (cfg.conv_kernel % 2 == 0)
    throw std::invalid_argument("svvad: conv kernel must be odd");
  if (has_adapters_) {
    in_proj_ = nn::Linear::create(ps, prefix + ".in_proj", cfg.feat_dim,
                                  cfg.conformer_dim);
    out_proj_ = nn::Linear::create(ps, prefix + ".out_proj", cfg.conformer_dim,
                                   cfg.feat_dim);
  }
  for (size_t i = 0; i < cfg.n_conf; ++i)
    conf_layers_.push_back(nn::ConformerLayer::create(
        ps, prefix + ".conformer." + std::to_string(i), cfg));
  embed_reduce_ = nn::Linear::create(ps, prefix + ".embed_reduce",
                                     cfg.embed_dim, cfg.embed_reduced);
  for (size_t i = 0; i < cfg.n_trans; ++i)
    trans_layers_.push_back(nn::TransformerLayer::create(
        ps, prefix + ".transformer." + std::to_string(i), cfg.fused_dim(),
        cfg.ffn_dim, cfg.n_heads));
}

Tensor SvvadTrunk::conformer_forward(const Tensor& x) const {
  if (x.cols() != cfg_.feat_dim)
    throw std::invalid_argument("svvad: conformer expects Tx" +
                                std::to_string(cfg_.feat_dim) + ", got " +
                                x.shape_str());
  Tensor h = has_adapters_ ? in_proj_.forward(x) : x;
  for (const auto& layer : conf_layers_) h = layer.forward(h);
  return has_adapters_ ? out_proj_.forward(h) : h;
}

Tensor SvvadTrunk::fuse(const Tensor& x_conf, const Tensor& v_enr) const {
  if (v_enr.rows() != 1 || v_enr.cols() != cfg_.embed_dim)
    throw std::invalid_argument("svvad: fuse expects a 1x" +
                                std::to_string(cfg_.embed_dim) +
                                " embedding, got " + v_enr.shape_str());
  if (x_conf.cols() != cfg_.feat_dim)
    throw std::invalid_argument("svvad: fuse expects Tx" +
                                std::to_string(cfg_.feat_dim) + ", got " +
                                x_conf.shape_str());
  Tensor reduced = embed_reduce_.forward(v_enr);        // 1 x E'
  Tensor tiled = tile_rows(reduced, x_conf.rows());     // T x E'
  Tensor z = concat_cols(tiled, x_conf);                // T x (E' + F)
  for (const auto& layer : trans_layers_) z = layer.forward(z);
  return z;
}

Tensor SvvadTrunk::forward(const Tensor& x, const Tensor& v_enr) const {
  return fuse(conformer_forward(x), v_enr);
}

SvvadModel::SvvadModel(BackboneConfig cfg, uint64_t param_seed)
    : cfg_(cfg), store_(param_seed) {
  trunk_ = std::make_unique<SvvadTrunk>(cfg_, store_, "svvad");
  // Gamma biased to 1, beta to 0, and small head weights: the untrained gate
  // starts close to transparent.
  gamma_head_ = nn::Linear::create(store_, "svvad.gamma_head", cfg_.fused_dim(),
                                   1, 1.0, 0.1);
  beta_head_ = nn::Linear::create(store_, "svvad.beta_head", cfg_.fused_dim(),
                                  1, 0.0, 0.1);
}

std::pair<Tensor, Tensor> SvvadModel::film_heads(const Tensor& z) const {
  if (z.cols() != cfg_.fused_dim())
    throw std::invalid_argument("svvad: film_heads expects Tx" +
                                std::to_string(cfg_.fused_dim()) + ", got " +
                                z.shape_str());
  Tensor gamma = gamma_head_.forward(z);
  if (cfg_.gamma_sigmoid) gamma = sigmoid(gamma);
  Tensor beta = beta_head_.forward(z);
  return {gamma, beta};
}

Tensor SvvadModel::film_apply(const Tensor& gamma, const Tensor& beta,
                              const Tensor& x) {
  if (gamma.rows() != x.rows() || gamma.cols() != 1 ||
      beta.rows() != x.rows() || beta.cols() != 1)
    throw std::invalid_argument(
        "svvad: film_apply needs Tx1 decisions for Tx" +
        std::to_string(x.cols()) + " features, got gamma " +
        gamma.shape_str() + ", beta " + beta.shape_str() + ", x " +
        x.shape_str());
  return add(mul(x, gamma), beta);
}

SvvadModel::Output SvvadModel::forward(const Tensor& x,
                                       const Tensor& v_enr) const {
  Tensor z = trunk_->forward(x, v_enr);
  auto [gamma, beta] = film_heads(z);
  return Output{gamma, beta, film_apply(gamma, beta, x)};
}

VadDecision SvvadModel::decide(const FeatureMatrix& feats,
                               const Embedding& enroll) const {
  Tensor x = Tensor::from_values(feats.T, feats.F, feats.values);
  Tensor v = Tensor::row(enroll.values);
  Output out = forward(x, v);
  return VadDecision{out.gamma.values(), out.beta.values()};
}

}  // namespace svvad
