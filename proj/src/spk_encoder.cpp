#include "svvad/spk_encoder.hpp"

#include <cmath>
#include <stdexcept>

#include "svvad/rng.hpp"

namespace svvad {

SpeakerEncoder::SpeakerEncoder(EncoderConfig cfg) : cfg_(cfg) {
  Rng rng(mix_seed(cfg_.seed, 0x656e63ULL));
  const size_t in = 2 * (cfg_.feat_dim - 1);
  const double limit = std::sqrt(6.0 / static_cast<double>(in + cfg_.embed_dim));
  std::vector<double> w(in * cfg_.embed_dim);
  for (auto& v : w) v = rng.uniform(-limit, limit);
  projection_ = Tensor::from_values(in, cfg_.embed_dim, std::move(w), false);
}

Tensor SpeakerEncoder::embed(const Tensor& features) const {
  if (features.rows() < 1 || features.cols() != cfg_.feat_dim)
    throw std::invalid_argument(
        "svvad: encoder expects Tx" + std::to_string(cfg_.feat_dim) +
        " features, got " + features.shape_str());

  const size_t F = cfg_.feat_dim;
  Tensor m = mean_rows(features);                    // 1 x F
  Tensor centered = sub(features, m);                // T x F
  Tensor var = mean_rows(mul(centered, centered));   // 1 x F
  Tensor sd = sqrt_op(add_const(var, 1e-8));

  // First difference along the mel axis: level and smooth tilt are common to
  // every utterance and would swamp the cosine geometry; the derivative
  // keeps the localized formant structure that identifies a speaker.
  Tensor dm = sub(slice_cols(m, 1, F - 1), slice_cols(m, 0, F - 1));
  Tensor dsd = sub(slice_cols(sd, 1, F - 1), slice_cols(sd, 0, F - 1));
  Tensor pooled = concat_cols(dm, dsd);              // 1 x 2(F-1)

  // Normalize to a sqrt(dim) magnitude so tanh operates in its linear-ish
  // range regardless of input scale.
  Tensor norm = sqrt_op(add_const(sum_all(mul(pooled, pooled)), 1e-16));
  Tensor unit = div(pooled, add_const(norm, 1e-8));
  Tensor scaled =
      scale(unit, std::sqrt(static_cast<double>(2 * (F - 1))));
  return tanh_op(matmul(scaled, projection_));       // 1 x E
}

Embedding SpeakerEncoder::embed(const FeatureMatrix& features) const {
  if (features.T < 1)
    throw std::invalid_argument("svvad: embed on empty features");
  Tensor x = Tensor::from_values(features.T, features.F, features.values);
  Tensor e = embed(x);
  return Embedding{e.values()};
}

uint64_t SpeakerEncoder::weights_hash() const {
  const auto& v = projection_.values();
  return fnv1a_hash_bytes(v.data(), v.size() * sizeof(double));
}

namespace {

double norm2(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

}  // namespace

double score(const Embedding& a, const Embedding& b) {
  if (a.values.size() != b.values.size())
    throw std::invalid_argument("svvad: embedding dims differ");
  const double na = norm2(a.values), nb = norm2(b.values);
  if (na <= 0.0 || nb <= 0.0)
    throw std::invalid_argument("svvad: cosine of zero-norm embedding");
  double dot = 0.0;
  for (size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
  return dot / (na * nb);
}

double cosine_distance(const Embedding& a, const Embedding& b) {
  return 1.0 - score(a, b);
}

}  // namespace svvad
