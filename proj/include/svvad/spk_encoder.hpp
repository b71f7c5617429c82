#pragma once

#include <cstdint>
#include <vector>

#include "svvad/features.hpp"
#include "svvad/tensor.hpp"

namespace svvad {

// E-dimensional speaker vector.
struct Embedding {
  std::vector<double> values;
};

struct EncoderConfig {
  size_t feat_dim = 40;
  size_t embed_dim = 192;
  uint64_t seed = 0x5e5e5eULL;
};

// Frozen stand-in for a pretrained speaker-verification model: statistics
// pooling (per-dimension mean and std over time), unit-normalized, then a
// seeded random linear map with a tanh nonlinearity. Never trained; the
// weights are constants outside every parameter store. embed() is
// differentiable with respect to its input so gradients can flow through it
// into an upstream gate.
class SpeakerEncoder {
 public:
  explicit SpeakerEncoder(EncoderConfig cfg);

  const EncoderConfig& config() const { return cfg_; }

  // Graph-capable path; features must be T x feat_dim with T >= 1.
  Tensor embed(const Tensor& features) const;

  // Convenience wrapper over the same computation.
  Embedding embed(const FeatureMatrix& features) const;

  uint64_t weights_hash() const;

 private:
  EncoderConfig cfg_;
  Tensor projection_;  // 2F x E, requires_grad = false
};

// 1 - cosine similarity; range [0, 2]. Throws on zero-norm input.
double cosine_distance(const Embedding& a, const Embedding& b);

// Cosine similarity in [-1, 1]; higher means more likely the same speaker.
double score(const Embedding& a, const Embedding& b);

}  // namespace svvad
