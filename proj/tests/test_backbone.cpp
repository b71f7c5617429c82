#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "svvad/backbone.hpp"
#include "test_util.hpp"

using namespace svvad;
using svvad_test::fd_rel_err;
using svvad_test::random_tensor;

namespace {

BackboneConfig tiny_config(bool with_adapters) {
  BackboneConfig cfg;
  cfg.feat_dim = 8;
  cfg.conformer_dim = with_adapters ? 12 : 8;
  cfg.n_conf = 1;
  cfg.n_trans = 1;
  cfg.ffn_dim = 8;
  cfg.n_heads = 2;
  cfg.conv_kernel = 3;
  cfg.embed_dim = 8;
  cfg.embed_reduced = 4;
  return cfg;
}

}  // namespace

TEST_CASE("paper and desk configurations") {
  BackboneConfig p = BackboneConfig::paper();
  CHECK(p.n_conf == 4);
  CHECK(p.n_trans == 3);
  CHECK(p.ffn_dim == 256);
  CHECK(p.embed_dim == 192);
  CHECK(p.embed_reduced == 64);
  BackboneConfig d = BackboneConfig::desk();
  CHECK(d.fused_dim() == 56);
}

TEST_CASE("conformer preserves T x F exactly") {
  for (bool adapters : {false, true}) {
    SvvadModel model(tiny_config(adapters), 1);
    Rng rng(3);
    Tensor x = random_tensor(7, 8, rng, false);
    Tensor y = model.conformer_forward(x);
    CHECK(y.rows() == 7);
    CHECK(y.cols() == 8);
  }
  SvvadModel model(tiny_config(false), 1);
  CHECK_THROWS(model.conformer_forward(Tensor(7, 5)));
}

TEST_CASE("zeroed residual-branch scales reduce the conformer to identity") {
  BackboneConfig cfg = tiny_config(false);
  cfg.n_conf = 2;
  SvvadModel model(cfg, 2);
  for (const auto& p : model.params().parameters()) {
    if (p.name.find(".s_") != std::string::npos) {
      Tensor t = p.tensor;  // shares the underlying leaf
      auto& v = t.mutable_values();
      std::fill(v.begin(), v.end(), 0.0);
    }
  }
  Rng rng(4);
  Tensor x = random_tensor(6, 8, rng, false);
  Tensor y = model.conformer_forward(x);
  for (size_t i = 0; i < x.size(); ++i) CHECK(y.values()[i] == x.values()[i]);
}

TEST_CASE("fuse tiles the reduced embedding and widens to E' + F") {
  BackboneConfig cfg = tiny_config(false);
  SvvadModel model(cfg, 5);
  Rng rng(6);
  Tensor x = random_tensor(5, 8, rng, false);
  Tensor v = random_tensor(1, 8, rng, false);

  Tensor z = model.fuse(x, v);
  CHECK(z.rows() == 5);
  CHECK(z.cols() == cfg.embed_reduced + cfg.feat_dim);
  CHECK_THROWS(model.fuse(x, Tensor(1, 5)));

  // The replicated rows are identical before concatenation; checked through
  // the public pieces by tiling directly.
  Tensor tiled = tile_rows(v, 4);
  for (size_t r = 1; r < 4; ++r)
    for (size_t c = 0; c < v.cols(); ++c)
      CHECK(tiled.at(r, c) == tiled.at(0, c));
}

TEST_CASE("fuse is permutation-equivariant over frames") {
  // No positional encoding: permuting the T rows of x_conf permutes the
  // fused rows identically.
  SvvadModel model(tiny_config(false), 7);
  Rng rng(8);
  Tensor x = random_tensor(6, 8, rng, false);
  Tensor v = random_tensor(1, 8, rng, false);
  std::vector<size_t> perm = {4, 0, 5, 2, 1, 3};

  Tensor z = model.fuse(x, v);
  Tensor z_perm = model.fuse(gather_rows(x, perm), v);
  for (size_t r = 0; r < perm.size(); ++r)
    for (size_t c = 0; c < z.cols(); ++c)
      CHECK(z_perm.at(r, c) ==
            doctest::Approx(z.at(perm[r], c)).epsilon(1e-9));
}

TEST_CASE("film heads output T x 1 and obey a bias-only configuration") {
  BackboneConfig cfg = tiny_config(false);
  SvvadModel model(cfg, 9);
  Rng rng(10);
  Tensor z = random_tensor(5, cfg.fused_dim(), rng, false);
  auto [gamma, beta] = model.film_heads(z);
  CHECK(gamma.rows() == 5);
  CHECK(gamma.cols() == 1);
  CHECK(beta.rows() == 5);
  CHECK(beta.cols() == 1);

  // Zero weights, biases (1, 0): gamma == 1, beta == 0 for any input.
  for (const auto& p : model.params().parameters()) {
    if (p.name.find("gamma_head.w") != std::string::npos ||
        p.name.find("beta_head.w") != std::string::npos) {
      Tensor t = p.tensor;  // shares the underlying leaf
      auto& v = t.mutable_values();
      std::fill(v.begin(), v.end(), 0.0);
    }
  }
  auto [g1, b0] = model.film_heads(z);
  for (size_t t = 0; t < 5; ++t) {
    CHECK(g1.at(t, 0) == 1.0);
    CHECK(b0.at(t, 0) == 0.0);
  }
}

TEST_CASE("film_apply hand case and identity/suppression") {
  Tensor gamma = Tensor::from_values(2, 1, {2.0, 0.5});
  Tensor beta = Tensor::from_values(2, 1, {0.5, 0.0});
  Tensor x = Tensor::from_values(2, 2, {1, 2, 4, 6});
  Tensor out = SvvadModel::film_apply(gamma, beta, x);
  CHECK(out.at(0, 0) == doctest::Approx(2.5));
  CHECK(out.at(0, 1) == doctest::Approx(4.5));
  CHECK(out.at(1, 0) == doctest::Approx(2.0));
  CHECK(out.at(1, 1) == doctest::Approx(3.0));

  Tensor ones = Tensor::from_values(2, 1, {1, 1});
  Tensor zeros = Tensor::from_values(2, 1, {0, 0});
  Tensor same = SvvadModel::film_apply(ones, zeros, x);
  for (size_t i = 0; i < x.size(); ++i)
    CHECK(same.values()[i] == x.values()[i]);

  Tensor off = SvvadModel::film_apply(zeros, zeros, x);
  for (double v : off.values()) CHECK(v == 0.0);

  CHECK_THROWS(SvvadModel::film_apply(Tensor(3, 1), Tensor(3, 1), x));
}

TEST_CASE("film locality: a frozen decision touches only the edited frame") {
  SvvadModel model(tiny_config(false), 11);
  Rng rng(12);
  Tensor x = random_tensor(6, 8, rng, false);
  Tensor v = random_tensor(1, 8, rng, false);
  auto out = model.forward(x, v);

  Tensor x2 = Tensor::from_values(6, 8, x.values());
  x2.mutable_values()[3 * 8 + 2] += 0.7;  // frame 3
  Tensor gated2 = SvvadModel::film_apply(out.gamma, out.beta, x2);
  for (size_t t = 0; t < 6; ++t)
    for (size_t f = 0; f < 8; ++f) {
      if (t == 3)
        continue;
      CHECK(gated2.at(t, f) == out.gated.at(t, f));
    }
  CHECK(gated2.at(3, 2) != out.gated.at(3, 2));
}

TEST_CASE("forward is deterministic and shape-preserving") {
  BackboneConfig cfg = tiny_config(true);
  SvvadModel a(cfg, 21), b(cfg, 21), c(cfg, 22);
  CHECK(a.params().values_hash() == b.params().values_hash());
  CHECK(a.params().values_hash() != c.params().values_hash());

  Rng rng(13);
  Tensor x = random_tensor(9, 8, rng, false);
  Tensor v = random_tensor(1, 8, rng, false);
  auto o1 = a.forward(x, v);
  auto o2 = b.forward(x, v);
  CHECK(o1.gated.rows() == 9);
  CHECK(o1.gated.cols() == 8);
  CHECK(o1.gated.values() == o2.gated.values());
  CHECK(o1.gamma.values() == o2.gamma.values());
}

TEST_CASE("end-to-end gradients match finite differences") {
  for (bool adapters : {false, true}) {
    SvvadModel model(tiny_config(adapters), 31);
    Rng rng(14);
    Tensor x = random_tensor(5, 8, rng, false);
    Tensor v = random_tensor(1, 8, rng, false);
    Tensor target = random_tensor(5, 8, rng, false);

    std::vector<Tensor> leaves;
    for (const auto& p : model.params().parameters()) leaves.push_back(p.tensor);
    auto make_loss = [&] {
      auto out = model.forward(x, v);
      Tensor d = sub(out.gated, target);
      return mean_all(mul(d, d));
    };
    const double err = fd_rel_err(leaves, make_loss, 1e-4, 4, 555);
    INFO("adapters ", adapters);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("every parameter receives gradient from a generic triplet loss") {
  for (bool adapters : {false, true}) {
    SvvadModel model(tiny_config(adapters), 41);
    Rng rng(15);
    Tensor xp = random_tensor(6, 8, rng, false);
    Tensor xn = random_tensor(6, 8, rng, false);
    Tensor v = random_tensor(1, 8, rng, false);
    Tensor va = random_tensor(1, 8, rng, false);

    auto op = model.forward(xp, v);
    auto on = model.forward(xn, v);
    // Pool the gated frames into pseudo-embeddings and apply a triplet
    // hinge with a margin picked so the hinge is strictly active.
    Tensor vp = mean_rows(op.gated);
    Tensor vn = mean_rows(on.gated);
    Tensor dp = sub(va, vp);
    Tensor dn = sub(va, vn);
    Tensor gap = sub(sum_all(mul(dp, dp)), sum_all(mul(dn, dn)));
    const double margin = std::fabs(gap.scalar_value()) + 1.0;
    Tensor loss = relu(add_const(gap, margin));
    model.params().zero_grads();
    backward(loss);

    for (const auto& p : model.params().parameters()) {
      double max_abs = 0.0;
      for (double g : p.tensor.grad()) max_abs = std::max(max_abs, std::fabs(g));
      INFO("dead branch at ", p.name, " adapters=", adapters);
      CHECK(max_abs > 0.0);
    }
  }
}

TEST_CASE("decide wraps the tensor path for plain feature matrices") {
  BackboneConfig cfg = tiny_config(false);
  SvvadModel model(cfg, 51);
  FeatureMatrix f;
  f.T = 4;
  f.F = 8;
  f.values.assign(32, 0.25);
  Embedding e{std::vector<double>(8, 0.5)};
  VadDecision d = model.decide(f, e);
  CHECK(d.gamma.size() == 4);
  CHECK(d.beta.size() == 4);
}
