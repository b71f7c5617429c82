#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "svvad/tensor.hpp"
#include "test_util.hpp"

using namespace svvad;
using svvad_test::random_tensor;

TEST_CASE("from_values validates length against shape") {
  CHECK_THROWS_AS(Tensor::from_values(2, 2, {1.0, 2.0, 3.0}),
                  std::invalid_argument);
  Tensor t = Tensor::from_values(2, 2, {1, 2, 3, 4});
  CHECK(t.at(1, 0) == 3.0);
}

TEST_CASE("softmax of a symmetric row is uniform") {
  Tensor x = Tensor::row({0.0, 0.0});
  Tensor y = softmax_rows(x);
  CHECK(y.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(y.at(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("layer norm of a constant row is zero before affine") {
  Tensor x = Tensor::row({3.0, 3.0, 3.0, 3.0});
  Tensor gain = Tensor::row({1, 1, 1, 1});
  Tensor bias = Tensor::row({0, 0, 0, 0});
  Tensor y = layer_norm_rows(x, gain, bias);
  for (size_t c = 0; c < 4; ++c) CHECK(std::fabs(y.at(0, c)) < 1e-12);
}

TEST_CASE("matmul by identity returns the input") {
  Tensor eye = Tensor::from_values(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Rng rng(7);
  Tensor a = random_tensor(3, 4, rng, false);
  Tensor out = matmul(eye, a);
  for (size_t r = 0; r < 3; ++r)
    for (size_t c = 0; c < 4; ++c) CHECK(out.at(r, c) == a.at(r, c));
}

TEST_CASE("shape mismatch errors name both shapes") {
  Tensor a(2, 3);
  Tensor b(4, 5);
  try {
    matmul(a, b);
    FAIL("expected throw");
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
    CHECK(msg.find("4x5") != std::string::npos);
  }
  CHECK_THROWS_AS(add(Tensor(2, 3), Tensor(3, 3)), std::invalid_argument);
}

TEST_CASE("broadcasting add covers row, column and scalar operands") {
  Tensor x = Tensor::from_values(2, 2, {1, 2, 3, 4});
  Tensor row = Tensor::row({10, 20});
  Tensor col = Tensor::from_values(2, 1, {100, 200});
  Tensor s = Tensor::scalar(0.5);

  Tensor xr = add(x, row);
  CHECK(xr.at(0, 1) == 22.0);
  CHECK(xr.at(1, 0) == 13.0);

  Tensor xc = add(x, col);
  CHECK(xc.at(0, 1) == 102.0);
  CHECK(xc.at(1, 1) == 204.0);

  Tensor xs = mul(x, s);
  CHECK(xs.at(1, 1) == 2.0);
}

TEST_CASE("concat, slice, tile and reshape round out the shape ops") {
  Tensor a = Tensor::from_values(2, 2, {1, 2, 3, 4});
  Tensor b = Tensor::from_values(2, 1, {5, 6});
  Tensor cc = concat_cols(a, b);
  CHECK(cc.cols() == 3);
  CHECK(cc.at(0, 2) == 5.0);
  CHECK(cc.at(1, 2) == 6.0);

  Tensor cr = concat_rows({a, a});
  CHECK(cr.rows() == 4);
  CHECK(cr.at(3, 1) == 4.0);

  Tensor sc = slice_cols(cc, 1, 2);
  CHECK(sc.at(0, 0) == 2.0);
  CHECK(sc.at(0, 1) == 5.0);

  Tensor sr = slice_rows(cr, 2, 2);
  CHECK(sr.at(0, 0) == 1.0);

  Tensor g = gather_rows(cr, {3, 0});
  CHECK(g.at(0, 0) == 3.0);
  CHECK(g.at(1, 0) == 1.0);

  Tensor t = tile_rows(Tensor::row({7, 8}), 3);
  CHECK(t.rows() == 3);
  CHECK(t.at(2, 0) == 7.0);

  Tensor rs = reshape(a, 1, 4);
  CHECK(rs.at(0, 3) == 4.0);
  CHECK_THROWS_AS(reshape(a, 3, 2), std::invalid_argument);
}

TEST_CASE("reductions use fixed serial order and exact means") {
  Tensor x = Tensor::from_values(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(sum_all(x).scalar_value() == 21.0);
  CHECK(mean_all(x).scalar_value() == 3.5);
  Tensor mr = mean_rows(x);
  CHECK(mr.at(0, 0) == 2.5);
  CHECK(mr.at(0, 2) == 4.5);
  Tensor sc = sum_cols(x);
  CHECK(sc.at(0, 0) == 6.0);
  CHECK(sc.at(1, 0) == 15.0);
}

TEST_CASE("depthwise conv applies same padding per channel") {
  // Single channel, kernel [1, 2, 3]: out[t] = x[t-1] + 2 x[t] + 3 x[t+1].
  Tensor x = Tensor::from_values(3, 1, {1, 10, 100});
  Tensor k = Tensor::from_values(3, 1, {1, 2, 3});
  Tensor y = depthwise_conv1d(x, k);
  CHECK(y.at(0, 0) == doctest::Approx(2 + 30));
  CHECK(y.at(1, 0) == doctest::Approx(1 + 20 + 300));
  CHECK(y.at(2, 0) == doctest::Approx(10 + 200));
  CHECK_THROWS_AS(depthwise_conv1d(x, Tensor(2, 1)), std::invalid_argument);
}

TEST_CASE("finite inputs stay finite through saturating ops") {
  Tensor big = Tensor::row({800.0, -800.0, 0.0});
  for (const Tensor& y : {sigmoid(big), softmax_rows(big), silu(big),
                          tanh_op(big)}) {
    for (double v : y.values()) CHECK(std::isfinite(v));
  }
  Tensor gain = Tensor::row({1, 1, 1});
  Tensor bias = Tensor::row({0, 0, 0});
  for (double v : layer_norm_rows(Tensor::row({5, 5, 5}), gain, bias).values())
    CHECK(std::isfinite(v));
}

TEST_CASE("parameter initialization is seed-stable and name-unique") {
  ParameterStore s1(42), s2(42), s3(43);
  Tensor a1 = s1.create_glorot("layer.w", 4, 3, 4, 3);
  Tensor a2 = s2.create_glorot("layer.w", 4, 3, 4, 3);
  Tensor a3 = s3.create_glorot("layer.w", 4, 3, 4, 3);
  CHECK(a1.values() == a2.values());
  CHECK(a1.values() != a3.values());
  CHECK_THROWS_AS(s1.create_glorot("layer.w", 4, 3, 4, 3),
                  std::invalid_argument);
  CHECK_THROWS_AS(s1.get("missing"), std::out_of_range);
  Tensor c = s1.create_constant("layer.b", 1, 3, 0.25);
  CHECK(c.at(0, 2) == 0.25);
  CHECK(s1.total_size() == 15);
  CHECK(s1.values_hash() == s1.values_hash());
}

TEST_CASE("backward rejects non-scalar roots") {
  Tensor x(2, 2, true);
  Tensor y = add_const(x, 1.0);
  CHECK_THROWS_AS(backward(y), std::invalid_argument);
}
