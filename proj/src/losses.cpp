#include "svvad/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace svvad {

namespace {

constexpr double kEps = 1e-8;

// max(d, eps) for d >= 0, as relu(d - eps) + eps. Leaves well-conditioned
// denominators untouched (the hand-worked values come out exact) and pins
// degenerate ones at eps.
Tensor guard_min(const Tensor& d, double eps) {
  return add_const(relu(add_const(d, -eps)), eps);
}

void check_shapes(const TripletEmbeddings& e) {
  if (e.anchor.rows() != e.positive.rows() ||
      e.anchor.rows() != e.negative.rows() ||
      e.anchor.cols() != e.positive.cols() ||
      e.anchor.cols() != e.negative.cols())
    throw std::invalid_argument(
        "svvad: triplet shapes differ (" + e.anchor.shape_str() + " vs " +
        e.positive.shape_str() + " vs " + e.negative.shape_str() + ")");
  if (e.anchor.rows() < 1)
    throw std::invalid_argument("svvad: empty triplet batch");
}

void check_nonzero_rows(const Tensor& m, const char* which) {
  for (size_t r = 0; r < m.rows(); ++r) {
    double acc = 0.0;
    for (size_t c = 0; c < m.cols(); ++c) acc += m.at(r, c) * m.at(r, c);
    if (acc <= 0.0)
      throw std::invalid_argument(std::string("svvad: zero-norm row in ") +
                                  which + " embeddings");
  }
}

// Row-wise cosine distance between two B x E matrices -> B x 1.
Tensor row_cosine_distance(const Tensor& a, const Tensor& b) {
  Tensor dots = sum_cols(mul(a, b));
  Tensor na = sqrt_op(sum_cols(mul(a, a)));
  Tensor nb = sqrt_op(sum_cols(mul(b, b)));
  Tensor sim = div(dots, guard_min(mul(na, nb), kEps));
  return add_const(scale(sim, -1.0), 1.0);
}

}  // namespace

LossConfig LossConfig::for_variant(LossVariant v) {
  LossConfig cfg;
  cfg.variant = v;
  switch (v) {
    case LossVariant::kTl: cfg.alpha = 0.9; break;
    case LossVariant::kTlCos: cfg.alpha = 0.5; break;
    case LossVariant::kTlCcc: cfg.alpha = 0.55; break;
    case LossVariant::kTlCcos: cfg.alpha = 0.55; break;
    case LossVariant::kTlCosPlusTl:
      cfg.alpha = 0.5;
      cfg.alpha_secondary = 0.9;
      break;
    case LossVariant::kTlCcosPlusTlCcc:
      cfg.alpha = 0.55;
      cfg.alpha_secondary = 0.55;
      break;
  }
  return cfg;
}

LossVariant loss_variant_from_string(const std::string& name) {
  if (name == "tl") return LossVariant::kTl;
  if (name == "tlcos") return LossVariant::kTlCos;
  if (name == "tlccc") return LossVariant::kTlCcc;
  if (name == "tlccos") return LossVariant::kTlCcos;
  if (name == "tlcos+tl") return LossVariant::kTlCosPlusTl;
  if (name == "tlccos+tlccc") return LossVariant::kTlCcosPlusTlCcc;
  throw std::invalid_argument("svvad: unknown loss variant: " + name);
}

std::string loss_variant_name(LossVariant v) {
  switch (v) {
    case LossVariant::kTl: return "tl";
    case LossVariant::kTlCos: return "tlcos";
    case LossVariant::kTlCcc: return "tlccc";
    case LossVariant::kTlCcos: return "tlccos";
    case LossVariant::kTlCosPlusTl: return "tlcos+tl";
    case LossVariant::kTlCcosPlusTlCcc: return "tlccos+tlccc";
  }
  return "?";
}

Tensor loss_tl(const TripletEmbeddings& e, double alpha) {
  check_shapes(e);
  Tensor dp = sub(e.anchor, e.positive);
  Tensor dn = sub(e.anchor, e.negative);
  Tensor sq_p = sum_cols(mul(dp, dp));  // B x 1
  Tensor sq_n = sum_cols(mul(dn, dn));
  return sum_all(relu(add_const(sub(sq_p, sq_n), alpha)));
}

Tensor loss_tlcos(const TripletEmbeddings& e, double alpha) {
  check_shapes(e);
  check_nonzero_rows(e.anchor, "anchor");
  check_nonzero_rows(e.positive, "positive");
  check_nonzero_rows(e.negative, "negative");
  Tensor d_p = row_cosine_distance(e.anchor, e.positive);
  Tensor d_n = row_cosine_distance(e.anchor, e.negative);
  return sum_all(relu(add_const(sub(d_p, d_n), alpha)));
}

Tensor ccc(const Tensor& x, const Tensor& y) {
  if (x.size() != y.size())
    throw std::invalid_argument("svvad: ccc length mismatch (" +
                                x.shape_str() + " vs " + y.shape_str() + ")");
  if (x.size() < 2)
    throw std::invalid_argument("svvad: ccc needs at least 2 points");
  const size_t n = x.size();
  Tensor xf = reshape(x, 1, n);
  Tensor yf = reshape(y, 1, n);
  Tensor mx = mean_all(xf);
  Tensor my = mean_all(yf);
  Tensor cx = sub(xf, mx);
  Tensor cy = sub(yf, my);
  Tensor cov = mean_all(mul(cx, cy));
  Tensor var_x = mean_all(mul(cx, cx));
  Tensor var_y = mean_all(mul(cy, cy));
  Tensor dmean = sub(mx, my);
  Tensor denom = guard_min(add(add(var_x, var_y), mul(dmean, dmean)), kEps);
  return div(scale(cov, 2.0), denom);
}

Tensor loss_tlccc(const TripletEmbeddings& e, double alpha,
                  CccOrientation orientation) {
  check_shapes(e);
  if (e.anchor.size() < 2)
    throw std::invalid_argument("svvad: tlccc needs B*E >= 2");
  Tensor ccc_p = ccc(e.anchor, e.positive);
  Tensor ccc_n = ccc(e.anchor, e.negative);
  Tensor diff = orientation == CccOrientation::kLiteral ? sub(ccc_p, ccc_n)
                                                        : sub(ccc_n, ccc_p);
  return relu(add_const(diff, alpha));
}

Tensor loss_tlccos(const TripletEmbeddings& e, double alpha) {
  check_shapes(e);
  if (e.anchor.rows() < 2)
    throw std::invalid_argument("svvad: tlccos needs a batch of >= 2");
  check_nonzero_rows(e.anchor, "anchor");
  check_nonzero_rows(e.positive, "positive");
  check_nonzero_rows(e.negative, "negative");
  Tensor d_p = row_cosine_distance(e.anchor, e.positive);  // B x 1
  Tensor d_n = row_cosine_distance(e.anchor, e.negative);

  // cond gating is data-dependent control flow; the boundary carries
  // subgradient zero.
  std::vector<size_t> survivors;
  for (size_t i = 0; i < d_p.rows(); ++i)
    if (d_p.at(i, 0) - d_n.at(i, 0) + alpha > 0.0) survivors.push_back(i);
  if (survivors.size() < 2) return Tensor::scalar(0.0);

  Tensor sel_p = add_const(gather_rows(d_p, survivors), alpha);
  Tensor sel_n = gather_rows(d_n, survivors);
  return ccc(sel_p, sel_n);
}

Tensor triplet_loss(const TripletEmbeddings& e, const LossConfig& cfg) {
  switch (cfg.variant) {
    case LossVariant::kTl:
      return loss_tl(e, cfg.alpha);
    case LossVariant::kTlCos:
      return loss_tlcos(e, cfg.alpha);
    case LossVariant::kTlCcc:
      return loss_tlccc(e, cfg.alpha, cfg.orientation);
    case LossVariant::kTlCcos:
      return loss_tlccos(e, cfg.alpha);
    case LossVariant::kTlCosPlusTl:
      return add(loss_tlcos(e, cfg.alpha),
                 scale(loss_tl(e, cfg.alpha_secondary), cfg.xi));
    case LossVariant::kTlCcosPlusTlCcc:
      return add(loss_tlccos(e, cfg.alpha),
                 scale(loss_tlccc(e, cfg.alpha_secondary, cfg.orientation),
                       cfg.xi));
  }
  throw std::logic_error("svvad: unhandled loss variant");
}

}  // namespace svvad
