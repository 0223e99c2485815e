#include <cmath>
#include <vector>

#include "doctest.h"
#include "fd_check.hpp"
#include "gmnm.hpp"
#include "nets.hpp"
#include "rng.hpp"

using namespace gmnmlab;
using gmnmlab::testing::fd_check;

namespace {

GmnmConfig small_cfg(GmnmMode mode, int d = 2, int m = 3, int out = 1) {
  GmnmConfig cfg;
  cfg.d = d;
  cfg.m = m;
  cfg.out_dim = out;
  cfg.mode = mode;
  cfg.domain.assign(static_cast<std::size_t>(d), {-1.0, 1.0});
  return cfg;
}

// Single-AGP ridge params built by hand.
GmnmParams one_agp(std::vector<double> a_row, double b1, double alpha1,
                   double beta, std::vector<double> mu, double pi) {
  const std::size_t d = a_row.size();
  GmnmConfig cfg;
  cfg.d = static_cast<int>(d);
  cfg.m = 1;
  cfg.n = 1;
  cfg.mode = GmnmMode::ridge;
  GmnmParams p;
  p.cfg = cfg;
  p.mu = Tensor({1, d}, std::move(mu));
  p.A = Tensor({1, 1, d}, std::move(a_row));
  p.b = Tensor({1, 1}, {b1});
  p.alpha_raw = Tensor({1, 1}, {alpha1});
  p.beta_raw = Tensor({1}, {beta});
  p.Pi = Tensor({1, 1}, {pi});
  return p;
}

}  // namespace

TEST_CASE("init places centers in the domain box and zeroes Pi") {
  Rng rng(1);
  auto cfg = small_cfg(GmnmMode::ridge, 2, 3);
  GmnmParams p = gmnm_init(cfg, rng);
  for (double v : p.mu.span()) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
  // Pi zero-init: the untrained module is the zero function.
  Rng rng2(2);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> x = {rng2.uniform(-1, 1), rng2.uniform(-1, 1)};
    CHECK(gmnm_forward(p, x)[0] == 0.0);
  }
}

TEST_CASE("init is deterministic in the seed") {
  auto cfg = small_cfg(GmnmMode::quadratic, 3, 4, 2);
  Rng a(7), b(7);
  GmnmParams pa = gmnm_init(cfg, a);
  GmnmParams pb = gmnm_init(cfg, b);
  CHECK(pa.mu.bit_equal(pb.mu));
  CHECK(pa.A.bit_equal(pb.A));
  CHECK(pa.alpha_raw.bit_equal(pb.alpha_raw));
}

TEST_CASE("init data_sample draws rows without replacement") {
  auto cfg = small_cfg(GmnmMode::ridge, 2, 4);
  cfg.mu_init = MuInit::data_sample;
  Tensor data({6, 2}, {0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5});
  Rng rng(3);
  GmnmParams p = gmnm_init(cfg, rng, &data);
  for (int i = 0; i < 4; ++i) CHECK(p.mu[2 * i] == p.mu[2 * i + 1]);
  // centers are distinct data rows
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) CHECK(p.mu[2 * i] != p.mu[2 * j]);

  Tensor tiny({2, 2}, {0, 0, 1, 1});
  Rng rng2(3);
  CHECK_THROWS_AS(gmnm_init(cfg, rng2, &tiny), ConfigError);
}

TEST_CASE("agp_forward trivial values") {
  // all weights zero -> exp(0) = 1, any x
  GmnmParams p = one_agp({0, 0}, 0, 0, 0, {0.3, -0.4}, 1.0);
  std::vector<double> x = {0.9, -2.0};
  CHECK(agp_forward(p, 0, x) == 1.0);

  // ridge, x = mu, b = 0, beta = 0 -> y = 0 -> f = 1
  GmnmParams q = one_agp({1.5, -0.3}, 0, 1.0, 0, {0.25, 0.75}, 1.0);
  std::vector<double> center = {0.25, 0.75};
  CHECK(agp_forward(q, 0, center) == 1.0);

  // collapsed w = (1,0), c = 0, x - mu = (2,0) -> exp(-2)
  GmnmParams r = one_agp({1, 0}, 0, 1.0, 0, {0, 0}, 1.0);
  std::vector<double> x2 = {2.0, 0.0};
  CHECK(agp_forward(r, 0, x2) ==
        doctest::Approx(0.1353352832366127).epsilon(1e-15));
}

TEST_CASE("gmnm_forward single component at center") {
  GmnmParams p = one_agp({0.7, 0.1}, 0, 1.0, 0, {0.5, -0.5}, 2.0);
  std::vector<double> x = {0.5, -0.5};
  CHECK(gmnm_forward(p, x)[0] == 2.0);
}

TEST_CASE("output bound: |G_k| <= sum |Pi_k|") {
  Rng rng(21);
  for (GmnmMode mode : {GmnmMode::ridge, GmnmMode::quadratic}) {
    auto cfg = small_cfg(mode, 3, 5, 2);
    GmnmParams p = gmnm_init(cfg, rng);
    for (double& v : p.Pi.span()) v = rng.uniform(-3, 3);
    double bound0 = 0.0, bound1 = 0.0;
    for (int i = 0; i < 5; ++i) {
      bound0 += std::abs(p.Pi[static_cast<std::size_t>(i)]);
      bound1 += std::abs(p.Pi[static_cast<std::size_t>(5 + i)]);
    }
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> x = {rng.uniform(-4, 4), rng.uniform(-4, 4),
                               rng.uniform(-4, 4)};
      auto out = gmnm_forward(p, x);
      CHECK(std::abs(out[0]) <= bound0);
      CHECK(std::abs(out[1]) <= bound1);
    }
  }
}

TEST_CASE("AGP range (0,1] in both modes") {
  Rng rng(31);
  for (GmnmMode mode : {GmnmMode::ridge, GmnmMode::quadratic}) {
    auto cfg = small_cfg(mode, 4, 6);
    GmnmParams p = gmnm_init(cfg, rng);
    // push parameters around a realistic range, not just the init draw
    for (double& v : p.b.span()) v = rng.uniform(-1, 1);
    for (double& v : p.beta_raw.span()) v = rng.uniform(-1, 1);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> x(4);
      for (double& v : x) v = rng.uniform(-1.5, 1.5);
      for (int i = 0; i < 6; ++i) {
        const double f = agp_forward(p, i, x);
        CHECK(f > 0.0);
        CHECK(f <= 1.0);
      }
    }
  }
}

TEST_CASE("translation equivariance is exact") {
  // Inputs, centers and the shift live on a 2^-6 grid so every addition is
  // exact; the outputs must then match bit for bit.
  Rng rng(41);
  auto snap = [&](double lo, double hi) {
    return std::round(rng.uniform(lo, hi) * 64.0) / 64.0;
  };
  auto cfg = small_cfg(GmnmMode::ridge, 2, 4, 2);
  GmnmParams p = gmnm_init(cfg, rng);
  for (double& v : p.mu.span()) v = snap(-1, 1);
  for (double& v : p.Pi.span()) v = rng.uniform(-2, 2);
  const std::vector<double> delta = {0.375, -1.21875};
  GmnmParams shifted = p;
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 2; ++k)
      shifted.mu[static_cast<std::size_t>(2 * i + k)] +=
          delta[static_cast<std::size_t>(k)];
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x = {snap(-2, 2), snap(-2, 2)};
    std::vector<double> xs = {x[0] + delta[0], x[1] + delta[1]};
    const auto a = gmnm_forward(p, x);
    const auto b = gmnm_forward(shifted, xs);
    CHECK(a[0] == b[0]);
    CHECK(a[1] == b[1]);
  }
}

TEST_CASE("collapse_ridge composition") {
  GmnmConfig cfg;
  cfg.d = 2;
  cfg.m = 1;
  cfg.n = 2;
  GmnmParams p;
  p.cfg = cfg;
  p.mu = Tensor({1, 2});
  p.A = Tensor({1, 2, 2}, {2, 3, -1, 4});
  p.b = Tensor({1, 2}, {1, 0.25});
  p.alpha_raw = Tensor({1, 2}, {1, 0});
  p.beta_raw = Tensor({1}, {0.5});
  p.Pi = Tensor({1, 1}, {1});

  RidgeCollapse rc = collapse_ridge(p, 0);
  CHECK(rc.w[0] == 2.0);
  CHECK(rc.w[1] == 3.0);
  CHECK(rc.c == 1.5);

  p.alpha_raw = Tensor({1, 2});
  rc = collapse_ridge(p, 0);
  CHECK(rc.w[0] == 0.0);
  CHECK(rc.w[1] == 0.0);
  CHECK(rc.c == 0.5);
}

TEST_CASE("two-path equivalence: collapsed vs staged within 4 ulp") {
  Rng rng(51);
  auto cfg = small_cfg(GmnmMode::ridge, 3, 6);
  cfg.n = 3;
  GmnmParams p = gmnm_init(cfg, rng);
  for (double& v : p.b.span()) v = rng.uniform(-0.5, 0.5);
  for (double& v : p.beta_raw.span()) v = rng.uniform(-0.5, 0.5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(3);
    for (double& v : x) v = rng.uniform(-1, 1);
    for (int i = 0; i < 6; ++i) {
      const double staged = agp_forward(p, i, x);
      const double collapsed = agp_forward_collapsed(p, i, x);
      const double ulp = std::abs(staged) * 2.220446049250313e-16;
      CHECK(std::abs(staged - collapsed) <= 4.0 * ulp);
    }
  }
}

TEST_CASE("count_params accounting") {
  GmnmConfig pde;
  pde.d = 2;
  pde.m = 900;
  pde.minimal = true;
  pde.n = 1;
  pde.out_dim = 1;
  pde.trainable_mu = true;
  CHECK(count_params(pde) == 4500);

  pde.m = 1;
  CHECK(count_params(pde) == 5);

  GmnmConfig full;
  full.d = 2;
  full.n = 2;
  full.m = 1;
  full.out_dim = 1;
  full.trainable_mu = false;
  CHECK(count_params(full) == 10);  // A(4) + b(2) + alpha(2) + beta(1) + Pi(1)

  GmnmConfig bad;
  bad.m = 0;
  CHECK_THROWS_AS(count_params(bad), ConfigError);
}

TEST_CASE("mahalanobis embed: identity and zero matrices") {
  Tensor eye({2, 2}, {1, 0, 0, 1});
  GmnmParams p = mahalanobis_embed(eye);
  Rng rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> z = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
    const double want = std::exp(-0.5 * (z[0] * z[0] + z[1] * z[1]));
    CHECK(agp_forward(p, 0, z) == doctest::Approx(want).epsilon(1e-14));
  }

  Tensor zero({3, 3});
  GmnmParams pz = mahalanobis_embed(zero);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> z = {rng.uniform(-3, 3), rng.uniform(-3, 3),
                             rng.uniform(-3, 3)};
    CHECK(agp_forward(pz, 0, z) == 1.0);
  }
}

TEST_CASE("mahalanobis embed realizes z^T P z for random PSD matrices") {
  Rng rng(71);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t d = 2 + rng.index(7);  // 2..8
    // P = B B^T is symmetric PSD
    Tensor b = rng.uniform_tensor({d, d}, -1, 1);
    Tensor P({d, d});
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < d; ++k) acc += b[i * d + k] * b[j * d + k];
        P[i * d + j] = acc;
      }
    GmnmParams p = mahalanobis_embed(P);
    for (int zi = 0; zi < 100; ++zi) {
      std::vector<double> z(d);
      for (double& v : z) v = rng.uniform(-1.5, 1.5);
      double quad = 0.0;
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
          quad += z[i] * P[i * d + j] * z[j];
      // recover y from f = exp(-y/2)
      const double f = agp_forward(p, 0, z);
      const double y = -2.0 * std::log(f);
      CHECK(std::abs(y - quad) < 1e-10);
      CHECK(f == doctest::Approx(std::exp(-0.5 * quad)).epsilon(1e-12));
    }
  }
}

TEST_CASE("mahalanobis embed rejects bad matrices") {
  Tensor asym({2, 2}, {1, 0.5, -0.5, 1});
  CHECK_THROWS(mahalanobis_embed(asym));
  Tensor indef({2, 2}, {1, 0, 0, -1});
  CHECK_THROWS(mahalanobis_embed(indef));
}

TEST_CASE("analytic input gradient and Laplacian: trivial cases") {
  // stationary at the center when c = 0
  GmnmParams p = one_agp({1.2, -0.8}, 0, 1.0, 0, {0.1, 0.2}, 1.0);
  std::vector<double> center = {0.1, 0.2};
  Tensor g = gmnm_input_gradient(p, center);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.0);

  // single AGP, pi = 1, w = (1,1), x = mu, c = 0 -> Laplacian = -|w|^2 = -2
  GmnmParams q = one_agp({1, 1}, 0, 1.0, 0, {0, 0}, 1.0);
  std::vector<double> zero = {0.0, 0.0};
  CHECK(gmnm_input_laplacian(q, zero)[0] == doctest::Approx(-2.0));

  // Pi = 0 -> zero everywhere
  GmnmParams r = one_agp({1, 1}, 0.3, 0.7, 0.1, {0, 0}, 0.0);
  std::vector<double> x = {0.4, -0.9};
  CHECK(gmnm_input_gradient(r, x)[0] == 0.0);
  CHECK(gmnm_input_laplacian(r, x)[0] == 0.0);

  GmnmParams quad = mahalanobis_embed(Tensor({2, 2}, {1, 0, 0, 1}));
  CHECK_THROWS(gmnm_input_gradient(quad, x));
  CHECK_THROWS(gmnm_input_laplacian(quad, x));
}

TEST_CASE("analytic derivatives match the hyperdual oracle") {
  Rng rng(81);
  for (int trial = 0; trial < 20; ++trial) {
    auto cfg = small_cfg(GmnmMode::ridge, 3, 4, 2);
    cfg.n = 2;
    GmnmParams p = gmnm_init(cfg, rng);
    for (double& v : p.Pi.span()) v = rng.uniform(-2, 2);
    for (double& v : p.b.span()) v = rng.uniform(-0.5, 0.5);
    GmnmModel model(p);

    std::vector<double> x = {rng.uniform(-1, 1), rng.uniform(-1, 1),
                             rng.uniform(-1, 1)};
    const Tensor grad = gmnm_input_gradient(p, x);
    const auto lap = gmnm_input_laplacian(p, x);

    std::vector<double> hd_lap(2, 0.0);
    for (std::size_t k = 0; k < 3; ++k) {
      std::vector<HyperDual> hx = {HyperDual(x[0]), HyperDual(x[1]),
                                   HyperDual(x[2])};
      hx[k] = HyperDual::seed(x[k]);
      const auto out = model.forward_hd(hx);
      for (std::size_t ko = 0; ko < 2; ++ko) {
        const double want = out[ko].d1;
        const double got = grad[ko * 3 + k];
        CHECK(std::abs(got - want) <=
              1e-10 * std::max({1.0, std::abs(got), std::abs(want)}));
        hd_lap[ko] += out[ko].d2;
      }
    }
    for (std::size_t ko = 0; ko < 2; ++ko)
      CHECK(std::abs(lap[ko] - hd_lap[ko]) <=
            1e-8 * std::max({1.0, std::abs(lap[ko]), std::abs(hd_lap[ko])}));
  }
}

TEST_CASE("tape forward agrees with the staged per-sample path") {
  Rng rng(91);
  for (GmnmMode mode : {GmnmMode::ridge, GmnmMode::quadratic}) {
    auto cfg = small_cfg(mode, 2, 5, 3);
    GmnmParams p = gmnm_init(cfg, rng);
    for (double& v : p.Pi.span()) v = rng.uniform(-2, 2);
    for (double& v : p.b.span()) v = rng.uniform(-0.5, 0.5);
    GmnmModel model(p);
    const Tensor X = rng.uniform_tensor({7, 2}, -1.5, 1.5);
    const Tensor out = model.forward(X);
    for (std::size_t r = 0; r < 7; ++r) {
      std::vector<double> x = {X[2 * r], X[2 * r + 1]};
      const auto ref = model.forward_one(x);
      for (std::size_t k = 0; k < 3; ++k)
        CHECK(out[r * 3 + k] ==
              doctest::Approx(ref[k]).epsilon(1e-13));
    }
  }
}

TEST_CASE("batched evaluation equals stacked single-row evaluation exactly") {
  Rng rng(101);
  auto cfg = small_cfg(GmnmMode::ridge, 2, 4, 2);
  GmnmParams p = gmnm_init(cfg, rng);
  for (double& v : p.Pi.span()) v = rng.uniform(-2, 2);
  GmnmModel model(p);
  const Tensor X = rng.uniform_tensor({6, 2}, -1, 1);
  const Tensor batch = model.forward(X);
  for (std::size_t r = 0; r < 6; ++r) {
    Tensor row({1, 2}, {X[2 * r], X[2 * r + 1]});
    const Tensor one = model.forward(row);
    CHECK(batch[2 * r] == one[0]);
    CHECK(batch[2 * r + 1] == one[1]);
  }
}

TEST_CASE("tape Laplacian equals the closed form") {
  Rng rng(111);
  auto cfg = small_cfg(GmnmMode::ridge, 2, 5);
  cfg.minimal = true;
  cfg.n = 1;
  GmnmParams p = gmnm_init(cfg, rng);
  for (double& v : p.Pi.span()) v = rng.uniform(-2, 2);
  GmnmModel model(p);
  const Tensor X = rng.uniform_tensor({9, 2}, -1, 1);

  Tape t;
  const int x = t.input(X, false);
  int lap = -1;
  (void)model.forward_tape_with_laplacian(t, x, &lap);
  const Tensor lap_tape = t.value(lap);
  for (std::size_t r = 0; r < 9; ++r) {
    std::vector<double> xr = {X[2 * r], X[2 * r + 1]};
    const auto ref = gmnm_input_laplacian(p, xr);
    CHECK(lap_tape[r] == doctest::Approx(ref[0]).epsilon(1e-12));
  }
}

TEST_CASE("parameter gradients match finite differences in both modes") {
  Rng rng(121);
  for (GmnmMode mode : {GmnmMode::ridge, GmnmMode::quadratic}) {
    auto cfg = small_cfg(mode, 2, 3, 2);
    GmnmParams init = gmnm_init(cfg, rng);
    for (double& v : init.Pi.span()) v = rng.uniform(-1, 1);
    for (double& v : init.b.span()) v = rng.uniform(-0.5, 0.5);
    for (double& v : init.beta_raw.span()) v = rng.uniform(-0.5, 0.5);
    const Tensor X = rng.uniform_tensor({5, 2}, -1, 1);
    const Tensor Y = rng.uniform_tensor({5, 2}, -1, 1);

    std::vector<Tensor> params = {init.mu, init.A, init.b, init.alpha_raw,
                                  init.beta_raw, init.Pi};
    auto rep = fd_check(
        [&](Tape& t, std::vector<int>& leaves) {
          GmnmParams p = init;
          p.mu = params[0];
          p.A = params[1];
          p.b = params[2];
          p.alpha_raw = params[3];
          p.beta_raw = params[4];
          p.Pi = params[5];
          GmnmModel model(p);
          const int x = t.input(X, false);
          const int out = model.forward_tape(t, x);
          leaves = model.tape_param_nodes();
          return t.mse(out, t.input(Y, false));
        },
        params);
    CHECK(rep.max_rel < 1e-5);
    CHECK(rep.max_abs < 1e-8);
  }
}

TEST_CASE("minimal mode freezes the staged parameters") {
  Rng rng(131);
  GmnmConfig cfg;
  cfg.d = 2;
  cfg.m = 4;
  cfg.minimal = true;
  cfg.domain.assign(2, {-1.0, 1.0});
  GmnmParams p = gmnm_init(cfg, rng);
  CHECK(p.alpha_raw[0] == 1.0);
  GmnmModel model(p);
  int trainable = 0;
  for (const auto& blk : model.param_blocks())
    if (blk.trainable) trainable += static_cast<int>(blk.value->size());
  CHECK(trainable == count_params(cfg));
  CHECK(trainable == 4 * 5);
}
