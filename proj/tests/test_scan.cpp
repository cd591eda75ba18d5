#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "monomm/gradcheck.hpp"
#include "monomm/ops.hpp"
#include "monomm/rng.hpp"
#include "monomm/scan.hpp"

using namespace monomm;

namespace {

struct ScanInputs {
  Tensor<double> u, delta, B, C, A_log, D;
};

ScanInputs make_inputs(int T, int E, int N, uint64_t seed) {
  Rng rng(seed);
  ScanInputs si;
  si.u = Tensor<double>::rand_uniform({T, E}, rng, -1.0, 1.0);
  si.delta = Tensor<double>::rand_uniform({T, E}, rng, 0.05, 0.5);
  si.B = Tensor<double>::rand_uniform({T, N}, rng, -1.0, 1.0);
  si.C = Tensor<double>::rand_uniform({T, N}, rng, -1.0, 1.0);
  si.A_log = Tensor<double>::rand_uniform({E, N}, rng, -2.0, 0.5);
  si.D = Tensor<double>::rand_uniform({E}, rng, -1.0, 1.0);
  return si;
}

}  // namespace

TEST_CASE("scan matches a hand-unrolled two-step recurrence") {
  // T=2, E=1, N=1; single state, every quantity scalar
  double u0 = 0.7, u1 = -0.4;
  double d0 = 0.3, d1 = 0.2;
  double b0 = 1.1, b1 = -0.6;
  double c0 = 0.9, c1 = 1.3;
  double alog = -0.5, Dv = 0.25;
  auto u = Tensor<double>::from_data({2, 1}, {u0, u1});
  auto dl = Tensor<double>::from_data({2, 1}, {d0, d1});
  auto B = Tensor<double>::from_data({2, 1}, {b0, b1});
  auto C = Tensor<double>::from_data({2, 1}, {c0, c1});
  auto A_log = Tensor<double>::from_data({1, 1}, {alog});
  auto D = Tensor<double>::from_data({1}, {Dv});

  double A = -std::exp(alog);
  double h0 = std::exp(d0 * A) * 0.0 + d0 * b0 * u0;
  double y0 = c0 * h0 + Dv * u0;
  double h1 = std::exp(d1 * A) * h0 + d1 * b1 * u1;
  double y1 = c1 * h1 + Dv * u1;

  for (bool fast : {false, true}) {
    auto y = selective_scan(u, dl, B, C, A_log, D, fast);
    REQUIRE(y.shape() == Shape{2, 1});
    CHECK(y.data()[0] == doctest::Approx(y0).epsilon(1e-14));
    CHECK(y.data()[1] == doctest::Approx(y1).epsilon(1e-14));
  }
}

TEST_CASE("fast and reference paths agree to 1e-10") {
  for (int T : {1, 3, 8, 64, 255}) {
    for (int N : {4, 8, 16, 5}) {
      auto si = make_inputs(T, 6, N, uint64_t(T * 1000 + N));
      NoGradGuard ng;
      auto yr = selective_scan(si.u, si.delta, si.B, si.C, si.A_log, si.D,
                               false);
      auto yf = selective_scan(si.u, si.delta, si.B, si.C, si.A_log, si.D,
                               true);
      double md = 0;
      for (int64_t i = 0; i < yr.numel(); ++i) {
        double den = std::max(
            {std::abs(yr.data()[i]), std::abs(yf.data()[i]), 1e-12});
        md = std::max(md, std::abs(yr.data()[i] - yf.data()[i]) / den);
      }
      CHECK(md <= 1e-10);
    }
  }
}

TEST_CASE("decay keeps the state bounded for long sequences") {
  // A = -exp(A_log) < 0 so exp(delta*A) < 1 always
  auto si = make_inputs(1024, 4, 8, 99);
  NoGradGuard ng;
  auto y = selective_scan(si.u, si.delta, si.B, si.C, si.A_log, si.D, true);
  for (int64_t i = 0; i < y.numel(); ++i)
    CHECK(std::isfinite(y.data()[i]));
}

TEST_CASE("state carries information forward but not backward") {
  auto si = make_inputs(12, 3, 4, 7);
  NoGradGuard ng;
  auto y1 = selective_scan(si.u, si.delta, si.B, si.C, si.A_log, si.D, true);
  auto u2 = si.u.clone();
  u2.data()[5 * 3 + 1] += 1.0;  // perturb token 5
  auto y2 = selective_scan(u2, si.delta, si.B, si.C, si.A_log, si.D, true);
  // tokens before 5 are untouched; some token >= 5 must change
  for (int t = 0; t < 5; ++t)
    for (int e = 0; e < 3; ++e)
      CHECK(y1.data()[t * 3 + e] == y2.data()[t * 3 + e]);
  double diff = 0;
  for (int t = 5; t < 12; ++t)
    for (int e = 0; e < 3; ++e)
      diff += std::abs(y1.data()[t * 3 + e] - y2.data()[t * 3 + e]);
  CHECK(diff > 1e-6);
}

TEST_CASE("gradcheck: selective_scan wrt all six inputs") {
  for (bool fast : {false, true}) {
    auto si = make_inputs(5, 3, 4, fast ? 301 : 302);
    Rng rng(55);
    auto probe = Tensor<double>::rand_uniform({5, 3}, rng, -1.0, 1.0);
    auto f = [&](std::vector<Tensor<double>>& in) {
      return dot(
          selective_scan(in[0], in[1], in[2], in[3], in[4], in[5], fast),
          probe);
    };
    double err = finite_diff_check<double>(
        f, {si.u, si.delta, si.B, si.C, si.A_log, si.D}, 1e-6);
    CHECK(err < 1e-6);
  }
}

TEST_CASE("gradcheck: scan composed with softplus-parameterized delta") {
  // the production path feeds delta through softplus; check the composite
  auto si = make_inputs(4, 2, 4, 77);
  Rng rng(56);
  auto raw = Tensor<double>::rand_uniform({4, 2}, rng, -1.5, 1.5);
  auto probe = Tensor<double>::rand_uniform({4, 2}, rng, -1.0, 1.0);
  auto f = [&](std::vector<Tensor<double>>& in) {
    return dot(selective_scan(in[0], softplus(in[1]), in[2], in[3], in[4],
                              in[5], true),
               probe);
  };
  double err = finite_diff_check<double>(
      f, {si.u, raw, si.B, si.C, si.A_log, si.D}, 1e-6);
  CHECK(err < 1e-6);
}
