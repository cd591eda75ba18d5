#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "monomm/gradcheck.hpp"
#include "monomm/ops.hpp"
#include "monomm/rng.hpp"
#include "monomm/tensor.hpp"

using namespace monomm;

namespace {
Tensor<double> rand_t(const Shape& s, Rng& rng, double lo = -1.0,
                      double hi = 1.0) {
  return Tensor<double>::rand_uniform(s, rng, lo, hi);
}
}  // namespace

TEST_CASE("rng streams are reproducible") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.uniform() == b.uniform());
    CHECK(a.normal() == b.normal());
  }
  Rng c(42), d(43);
  bool differs = false;
  for (int i = 0; i < 10; ++i)
    if (c.uniform() != d.uniform()) differs = true;
  CHECK(differs);
}

TEST_CASE("elementwise forward values") {
  auto a = Tensor<double>::from_data({3}, {1.0, -2.0, 0.5});
  auto b = Tensor<double>::from_data({3}, {4.0, 1.0, -1.0});
  auto s = add(a, b);
  CHECK(s.data()[0] == 5.0);
  CHECK(s.data()[1] == -1.0);
  auto m = mul(a, b);
  CHECK(m.data()[0] == 4.0);
  CHECK(m.data()[2] == -0.5);
  CHECK(sum(a).item() == doctest::Approx(-0.5));
  CHECK(mean(a).item() == doctest::Approx(-0.5 / 3.0));

  // silu(1) = 1/(1+e^-1)
  auto sl = silu(Tensor<double>::from_data({1}, {1.0}));
  CHECK(sl.item() == doctest::Approx(0.7310585786300049).epsilon(1e-12));
  auto rl = relu(Tensor<double>::from_data({2}, {-3.0, 2.0}));
  CHECK(rl.data()[0] == 0.0);
  CHECK(rl.data()[1] == 2.0);
  // softplus(0) = ln 2
  auto sp = softplus(Tensor<double>::from_data({1}, {0.0}));
  CHECK(sp.item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // large inputs must not overflow
  auto sp2 = softplus(Tensor<double>::from_data({2}, {800.0, -800.0}));
  CHECK(sp2.data()[0] == doctest::Approx(800.0));
  CHECK(sp2.data()[1] == doctest::Approx(0.0));
}

TEST_CASE("linear matches hand computation") {
  // x [2,3] * w [2,3]^T + b
  auto x = Tensor<double>::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  auto w = Tensor<double>::from_data({2, 3}, {1, 0, -1, 0.5, 0.5, 0.5});
  auto b = Tensor<double>::from_data({2}, {10, 20});
  auto y = linear(x, w, b);
  REQUIRE(y.shape() == Shape{2, 2});
  CHECK(y.data()[0] == doctest::Approx(1 - 3 + 10));
  CHECK(y.data()[1] == doctest::Approx(3.0 + 20));
  CHECK(y.data()[2] == doctest::Approx(4 - 6 + 10));
  CHECK(y.data()[3] == doctest::Approx(7.5 + 20));
}

TEST_CASE("layer_norm normalizes rows") {
  auto x = Tensor<double>::from_data({1, 4}, {1, 2, 3, 4});
  auto g = Tensor<double>::filled({4}, 1.0);
  auto be = Tensor<double>::filled({4}, 0.0);
  auto y = layer_norm(x, g, be);
  double mu = 0, var = 0;
  for (int i = 0; i < 4; ++i) mu += y.data()[i];
  for (int i = 0; i < 4; ++i) var += y.data()[i] * y.data()[i];
  CHECK(mu == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(var / 4 == doctest::Approx(1.0).epsilon(1e-4));  // eps shrinks it
  // x = [1,2,3,4]: mean 2.5, var 1.25
  double expect0 = (1 - 2.5) / std::sqrt(1.25 + 1e-5);
  CHECK(y.data()[0] == doctest::Approx(expect0).epsilon(1e-12));
}

TEST_CASE("backward chains through composite expressions") {
  // L = sum((a+b) * a) => dL/da = 2a + b, dL/db = a
  auto a = Tensor<double>::from_data({3}, {1, 2, 3}, true);
  auto b = Tensor<double>::from_data({3}, {4, 5, 6}, true);
  auto L = sum(mul(add(a, b), a));
  L.backward();
  CHECK(a.grad()[0] == doctest::Approx(6.0));
  CHECK(a.grad()[1] == doctest::Approx(9.0));
  CHECK(a.grad()[2] == doctest::Approx(12.0));
  CHECK(b.grad()[0] == doctest::Approx(1.0));
  CHECK(b.grad()[2] == doctest::Approx(3.0));
}

TEST_CASE("grad accumulates across multiple uses of one tensor") {
  auto a = Tensor<double>::from_data({2}, {3, -1}, true);
  auto L = sum(add(mul(a, a), a));  // d/da = 2a + 1
  L.backward();
  CHECK(a.grad()[0] == doctest::Approx(7.0));
  CHECK(a.grad()[1] == doctest::Approx(-1.0));
}

TEST_CASE("NoGradGuard suppresses graph construction") {
  auto a = Tensor<double>::from_data({2}, {1, 2}, true);
  {
    NoGradGuard ng;
    auto y = mul(a, a);
    CHECK_FALSE(y.on_graph());
  }
  auto y = mul(a, a);
  CHECK(y.on_graph());
}

TEST_CASE("backward on non-scalar throws") {
  auto a = Tensor<double>::from_data({2}, {1, 2}, true);
  auto y = mul(a, a);
  CHECK_THROWS(y.backward());
}

TEST_CASE("shape mismatches throw") {
  auto a = Tensor<double>::zeros({2, 3});
  auto b = Tensor<double>::zeros({3, 2});
  CHECK_THROWS(add(a, b));
  CHECK_THROWS(reshape(a, {7}));
  CHECK_THROWS(linear(a, Tensor<double>::zeros({4, 4}), Tensor<double>()));
}

TEST_CASE("reshape and reverse_rows round-trip with gradient") {
  Rng rng(7);
  auto x = rand_t({3, 4}, rng);
  auto r = reverse_rows(x);
  CHECK(r.data()[0] == x.data()[8]);
  CHECK(r.data()[11] == x.data()[3]);
  auto rr = reverse_rows(r);
  for (int i = 0; i < 12; ++i) CHECK(rr.data()[i] == x.data()[i]);
}

TEST_CASE("concat_ch stacks and routes gradients") {
  auto a = Tensor<double>::filled({1, 2, 2}, 1.0, true);
  auto b = Tensor<double>::filled({2, 2, 2}, 2.0, true);
  auto c = concat_ch<double>({a, b});
  REQUIRE(c.shape() == Shape{3, 2, 2});
  CHECK(c.data()[0] == 1.0);
  CHECK(c.data()[4] == 2.0);
  auto L = sum(mul(c, c));
  L.backward();
  CHECK(a.grad()[0] == doctest::Approx(2.0));
  CHECK(b.grad()[0] == doctest::Approx(4.0));
}

TEST_CASE("patch_extract layout and fold inverse") {
  // 1 channel 4x4, 2x2 patches: token order row-major over the patch grid
  std::vector<double> img(16);
  for (int i = 0; i < 16; ++i) img[size_t(i)] = i;
  auto x = Tensor<double>::from_data({1, 4, 4}, img);
  auto tk = patch_extract(x, 2, 2);
  REQUIRE(tk.shape() == Shape{4, 4});
  // token 1 = patch at (row 0, col 1) => pixels 2,3,6,7
  CHECK(tk.data()[4] == 2.0);
  CHECK(tk.data()[5] == 3.0);
  CHECK(tk.data()[6] == 6.0);
  CHECK(tk.data()[7] == 7.0);
  auto back = patch_fold(tk, 1, 4, 4, 2, 2);
  for (int i = 0; i < 16; ++i) CHECK(back.data()[i] == img[size_t(i)]);

  // 2 channels: within-token layout is channel-major
  std::vector<double> img2(2 * 4 * 4);
  for (size_t i = 0; i < img2.size(); ++i) img2[i] = double(i);
  auto x2 = Tensor<double>::from_data({2, 4, 4}, img2);
  auto tk2 = patch_extract(x2, 2, 2);
  REQUIRE(tk2.shape() == Shape{4, 8});
  // token 0: ch0 pixels {0,1,4,5} then ch1 pixels {16,17,20,21}
  CHECK(tk2.data()[0] == 0.0);
  CHECK(tk2.data()[3] == 5.0);
  CHECK(tk2.data()[4] == 16.0);
  CHECK(tk2.data()[7] == 21.0);
}

TEST_CASE("gradcheck: elementwise and reductions") {
  Rng rng(11);
  auto x = rand_t({4, 5}, rng);
  auto y = rand_t({4, 5}, rng);
  auto wv = rand_t({4, 5}, rng);

  auto f1 = [&](std::vector<Tensor<double>>& in) {
    return dot(mul(in[0], in[1]), in[2]);
  };
  CHECK(finite_diff_check<double>(f1, {x, y, wv}, 1e-5) < 1e-6);

  auto f2 = [&](std::vector<Tensor<double>>& in) {
    return dot(silu(in[0]), in[1]);
  };
  CHECK(finite_diff_check<double>(f2, {x, wv}, 1e-5) < 1e-6);

  auto f3 = [&](std::vector<Tensor<double>>& in) {
    return dot(sigmoid(in[0]), in[1]);
  };
  CHECK(finite_diff_check<double>(f3, {x, wv}, 1e-5) < 1e-6);

  auto f4 = [&](std::vector<Tensor<double>>& in) {
    return dot(softplus(in[0]), in[1]);
  };
  CHECK(finite_diff_check<double>(f4, {x, wv}, 1e-5) < 1e-6);

  // relu checked away from the kink
  auto xr = rand_t({4, 5}, rng);
  for (auto& v : xr.raw())
    if (std::abs(v) < 0.05) v += 0.2;
  auto f5 = [&](std::vector<Tensor<double>>& in) {
    return dot(relu(in[0]), in[1]);
  };
  CHECK(finite_diff_check<double>(f5, {xr, wv}, 1e-5) < 1e-6);
}

TEST_CASE("gradcheck: linear and layer_norm") {
  Rng rng(13);
  auto x = rand_t({3, 6}, rng);
  auto w = rand_t({4, 6}, rng);
  auto b = rand_t({4}, rng);
  auto probe = rand_t({3, 4}, rng);
  auto f = [&](std::vector<Tensor<double>>& in) {
    return dot(linear(in[0], in[1], in[2]), in[3]);
  };
  CHECK(finite_diff_check<double>(f, {x, w, b, probe}, 1e-5) < 1e-6);

  auto g = rand_t({6}, rng, 0.5, 1.5);
  auto be = rand_t({6}, rng);
  auto probe2 = rand_t({3, 6}, rng);
  auto f2 = [&](std::vector<Tensor<double>>& in) {
    return dot(layer_norm(in[0], in[1], in[2]), in[3]);
  };
  CHECK(finite_diff_check<double>(f2, {x, g, be, probe2}, 1e-5) < 1e-6);
}

TEST_CASE("gradcheck: layout ops") {
  Rng rng(17);
  auto x = rand_t({2, 4, 6}, rng);
  auto probe = rand_t({6, 8}, rng);
  auto f = [&](std::vector<Tensor<double>>& in) {
    return dot(patch_extract(in[0], 2, 2), in[1]);
  };
  CHECK(finite_diff_check<double>(f, {x, probe}, 1e-5) < 1e-6);

  auto tok = rand_t({6, 8}, rng);
  auto probe2 = rand_t({2, 4, 6}, rng);
  auto f2 = [&](std::vector<Tensor<double>>& in) {
    return dot(patch_fold(in[0], 2, 4, 6, 2, 2), in[1]);
  };
  CHECK(finite_diff_check<double>(f2, {tok, probe2}, 1e-5) < 1e-6);

  auto xr = rand_t({5, 3}, rng);
  auto probe3 = rand_t({5, 3}, rng);
  auto f3 = [&](std::vector<Tensor<double>>& in) {
    return dot(reverse_rows(in[0]), in[1]);
  };
  CHECK(finite_diff_check<double>(f3, {xr, probe3}, 1e-5) < 1e-6);
}

TEST_CASE("gradcheck: causal_conv1d") {
  Rng rng(19);
  auto x = rand_t({7, 5}, rng);
  auto w = rand_t({4, 5}, rng);
  auto b = rand_t({5}, rng);
  auto probe = rand_t({7, 5}, rng);
  auto f = [&](std::vector<Tensor<double>>& in) {
    return dot(causal_conv1d(in[0], in[1], in[2]), in[3]);
  };
  CHECK(finite_diff_check<double>(f, {x, w, b, probe}, 1e-5) < 1e-6);

  // causality: out[t] must not depend on x[t+1:]
  auto x2 = x.clone();
  x2.data()[6 * 5 + 0] += 100.0;  // last row
  NoGradGuard ng;
  auto y1 = causal_conv1d(x, w, b);
  auto y2 = causal_conv1d(x2, w, b);
  for (int t = 0; t < 6; ++t)
    for (int e = 0; e < 5; ++e)
      CHECK(y1.data()[t * 5 + e] == y2.data()[t * 5 + e]);
}

TEST_CASE("causal_conv1d left padding is zero") {
  // K=2, w = [w0; w1], out[0] = b + w1*x[0]
  auto x = Tensor<double>::from_data({2, 1}, {3.0, 5.0});
  auto w = Tensor<double>::from_data({2, 1}, {10.0, 1.0});
  auto b = Tensor<double>::from_data({1}, {0.5});
  auto y = causal_conv1d(x, w, b);
  CHECK(y.data()[0] == doctest::Approx(0.5 + 3.0));
  CHECK(y.data()[1] == doctest::Approx(0.5 + 10.0 * 3.0 + 5.0));
}
