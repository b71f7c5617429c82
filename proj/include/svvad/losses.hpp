#pragma once

#include <string>

#include "svvad/tensor.hpp"

namespace svvad {

// Anchor / positive / negative embeddings, one row per batch item.
struct TripletEmbeddings {
  Tensor anchor;    // B x E
  Tensor positive;  // B x E
  Tensor negative;  // B x E
};

enum class LossVariant {
  kTl,
  kTlCos,
  kTlCcc,
  kTlCcos,
  kTlCosPlusTl,      // TLcos + xi * TL
  kTlCcosPlusTlCcc,  // TLccos + xi * TLccc
};

// The concordance hinge can be applied exactly as printed (which rewards low
// anchor-positive concordance) or with the sign flipped so that minimizing
// the loss pulls positives toward the anchor. The flipped form is the
// default; the printed form stays available for fidelity experiments.
enum class CccOrientation { kLiteral, kSimilarityConsistent };

struct LossConfig {
  LossVariant variant = LossVariant::kTlCcosPlusTlCcc;
  double alpha = 0.55;
  // Margin of the second constituent of a combined loss (TL or TLccc).
  double alpha_secondary = 0.55;
  double xi = 0.1;
  CccOrientation orientation = CccOrientation::kSimilarityConsistent;

  // Margins as reported per variant: 0.9 (TL), 0.5 (TLcos), 0.55 (TLccc),
  // 0.55 (TLccos); combined variants keep each constituent's margin.
  static LossConfig for_variant(LossVariant v);
};

LossVariant loss_variant_from_string(const std::string& name);
std::string loss_variant_name(LossVariant v);

// sum_i [ |a_i - p_i|^2 - |a_i - n_i|^2 + alpha ]_+
Tensor loss_tl(const TripletEmbeddings& e, double alpha);

// sum_i [ cosd(a_i, p_i) - cosd(a_i, n_i) + alpha ]_+ with cosd the cosine
// distance. Rows must have nonzero norm.
Tensor loss_tlcos(const TripletEmbeddings& e, double alpha);

// Lin's concordance correlation coefficient over the flattened inputs:
// 2 cov(x, y) / (var(x) + var(y) + (mean_x - mean_y)^2 + eps), population
// moments. Lengths must match and be >= 2.
Tensor ccc(const Tensor& x, const Tensor& y);

// [ CCC(a, n) - CCC(a, p) + alpha ]_+ over flattened B x E matrices
// (similarity-consistent), or the printed orientation when requested.
Tensor loss_tlccc(const TripletEmbeddings& e, double alpha,
                  CccOrientation orientation);

// Per-item cosine distances d_p, d_n and cond = d_p - d_n + alpha; over the
// items with cond > 0 the loss is CCC(d_p + alpha, d_n) across the batch.
// Fewer than two surviving items yield 0 (the cond <= 0 branch).
Tensor loss_tlccos(const TripletEmbeddings& e, double alpha);

Tensor triplet_loss(const TripletEmbeddings& e, const LossConfig& cfg);

}  // namespace svvad
