#include <cmath>
#include <vector>

#include "doctest.h"
#include "fd_check.hpp"
#include "nets.hpp"
#include "rng.hpp"

using namespace gmnmlab;
using gmnmlab::testing::fd_check;

TEST_CASE("mlp parameter count for the reference widths") {
  Rng rng(1);
  MlpModel mlp({{2, 50, 50, 50, 1}, Act::tanh}, rng);
  CHECK(mlp.param_count() == 5301);
}

TEST_CASE("mlp with zero weights returns zero") {
  Rng rng(2);
  MlpModel mlp({{2, 8, 1}, Act::tanh}, rng);
  for (auto& w : mlp.weights())
    for (double& v : w.span()) v = 0.0;
  const Tensor out = mlp.forward(Tensor({3, 2}, {1, 2, -1, 0.5, 0, 0}));
  for (double v : out.span()) CHECK(v == 0.0);
}

TEST_CASE("mlp tape gradients match finite differences") {
  Rng rng(3);
  for (Act act : {Act::tanh, Act::silu}) {
    MlpModel mlp({{2, 6, 5, 1}, act}, rng);
    const Tensor X = rng.uniform_tensor({4, 2}, -1, 1);
    const Tensor Y = rng.uniform_tensor({4, 1}, -1, 1);
    std::vector<Tensor> params;
    for (std::size_t l = 0; l < mlp.weights().size(); ++l) {
      params.push_back(mlp.weights()[l]);
      params.push_back(mlp.biases()[l]);
    }
    auto rep = fd_check(
        [&](Tape& t, std::vector<int>& leaves) {
          for (std::size_t l = 0; l < mlp.weights().size(); ++l) {
            mlp.weights()[l] = params[2 * l];
            mlp.biases()[l] = params[2 * l + 1];
          }
          const int out = mlp.forward_tape(t, t.input(X, false));
          leaves = mlp.tape_param_nodes();
          return t.mse(out, t.input(Y, false));
        },
        params);
    CHECK(rep.max_rel < 1e-5);
    CHECK(rep.max_abs < 1e-8);
  }
}

TEST_CASE("mlp per-sample path agrees with the tape path") {
  Rng rng(4);
  MlpModel mlp({{3, 10, 4, 2}, Act::tanh}, rng);
  const Tensor X = rng.uniform_tensor({5, 3}, -2, 2);
  const Tensor out = mlp.forward(X);
  for (std::size_t r = 0; r < 5; ++r) {
    std::vector<double> x = {X[3 * r], X[3 * r + 1], X[3 * r + 2]};
    const auto ref = mlp.forward_one(x);
    for (std::size_t k = 0; k < 2; ++k)
      CHECK(out[r * 2 + k] == doctest::Approx(ref[k]).epsilon(1e-13));
  }
}

TEST_CASE("mlp Laplacian graph matches hyperdual evaluation") {
  Rng rng(5);
  MlpModel mlp({{2, 12, 9, 1}, Act::tanh}, rng);
  const Tensor X = rng.uniform_tensor({6, 2}, -1, 1);

  Tape t;
  int lap = -1;
  const int out = mlp.forward_tape_with_laplacian(t, t.input(X, false), &lap);
  const Tensor fwd = t.value(out);
  const Tensor lap_tape = t.value(lap);

  for (std::size_t r = 0; r < 6; ++r) {
    std::vector<double> x = {X[2 * r], X[2 * r + 1]};
    CHECK(fwd[r] == doctest::Approx(mlp.forward_one(x)[0]).epsilon(1e-13));
    const double hd = mlp.laplacian_eval(x)[0];
    CHECK(lap_tape[r] == doctest::Approx(hd).epsilon(1e-11));
  }

  MlpModel relu_mlp({{2, 4, 1}, Act::relu}, rng);
  Tape t2;
  int lap2 = -1;
  CHECK_THROWS(relu_mlp.forward_tape_with_laplacian(t2, t2.input(X, false),
                                                    &lap2));
}

TEST_CASE("rbf unit response at a center") {
  Rng rng(6);
  RbfModel rbf({2, 3, 1, {}}, rng);
  rbf.weights()[0] = 1.0;  // weight of component 0 only
  rbf.weights()[1] = 0.0;
  rbf.weights()[2] = 0.0;
  std::vector<double> x = {rbf.centers()[0], rbf.centers()[1]};
  CHECK(rbf.forward_one(x)[0] == 1.0);

  for (double& v : rbf.weights().span()) v = 0.0;
  CHECK(rbf.forward_one(x)[0] == 0.0);
}

TEST_CASE("rbf equals a quadratic-mode GMNM subset") {
  Rng rng(7);
  for (int trial = 0; trial < 6; ++trial) {
    const int d = 1 + static_cast<int>(rng.index(4));
    const int m = 1 + static_cast<int>(rng.index(5));
    RbfConfig cfg{d, m, 2, {}};
    RbfModel rbf(cfg, rng);
    for (double& v : rbf.weights().span()) v = rng.uniform(-2, 2);
    for (double& v : rbf.log_widths().span()) v = rng.uniform(-0.7, 0.7);
    GmnmParams twin = rbf.as_quadratic_gmnm();
    for (int zi = 0; zi < 100; ++zi) {
      std::vector<double> x(static_cast<std::size_t>(d));
      for (double& v : x) v = rng.uniform(-2, 2);
      const auto a = rbf.forward_one(x);
      const auto b = gmnm_forward(twin, x);
      for (std::size_t k = 0; k < 2; ++k)
        CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("rbf tape gradients match finite differences") {
  Rng rng(8);
  RbfModel rbf({2, 4, 1, {}}, rng);
  for (double& v : rbf.weights().span()) v = rng.uniform(-1, 1);
  const Tensor X = rng.uniform_tensor({5, 2}, -1, 1);
  const Tensor Y = rng.uniform_tensor({5, 1}, -1, 1);
  std::vector<Tensor> params = {rbf.centers(), rbf.log_widths(),
                                rbf.weights()};
  auto rep = fd_check(
      [&](Tape& t, std::vector<int>& leaves) {
        rbf.centers() = params[0];
        rbf.log_widths() = params[1];
        rbf.weights() = params[2];
        const int out = rbf.forward_tape(t, t.input(X, false));
        leaves = rbf.tape_param_nodes();
        return t.mse(out, t.input(Y, false));
      },
      params);
  CHECK(rep.max_rel < 1e-5);
  CHECK(rep.max_abs < 1e-8);
}

TEST_CASE("conv stack spatial arithmetic: 28 -> 26 -> 13 -> 11 -> 5") {
  ConvConfig cfg;
  CHECK(cfg.feat_h() == 5);
  CHECK(cfg.feat_w() == 5);
  Rng rng(9);
  ConvModel conv(cfg, rng);
  const Tensor img = rng.uniform_tensor({2, 28, 28, 1}, 0, 1);
  CHECK(conv.forward(img).shape() ==
        std::vector<std::size_t>{2, 10});

  ConvConfig tiny;
  tiny.h = 6;
  tiny.w = 6;  // second conv underflows: 6 -> 4 -> 2 -> 0
  CHECK_THROWS_AS(ConvModel(tiny, rng), ConfigError);
}

TEST_CASE("conv with all-zero parameters gives zero logits") {
  ConvConfig cfg;
  cfg.h = 12;
  cfg.w = 12;
  cfg.c1 = 2;
  cfg.c2 = 3;
  Rng rng(10);
  ConvModel conv(cfg, rng);
  for (auto& blk : conv.param_blocks())
    for (double& v : blk.value->span()) v = 0.0;
  const Tensor img = rng.uniform_tensor({2, 12, 12, 1}, 0, 1);
  const Tensor out = conv.forward(img);
  for (double v : out.span()) CHECK(v == 0.0);
}

TEST_CASE("conv+gmnm head gradients match finite differences") {
  Rng rng(11);
  ConvConfig cfg;
  cfg.h = 10;
  cfg.w = 10;
  cfg.c1 = 2;
  cfg.c2 = 3;
  cfg.classes = 2;
  cfg.head = ConvHead::gmnm;
  cfg.gmnm_m = 3;
  cfg.gmnm_n = 1;
  ConvModel conv(cfg, rng);
  const Tensor X = rng.uniform_tensor({2, 10, 10, 1}, 0, 1);
  const Tensor labels({2}, {0, 1});

  std::vector<Tensor> params;
  std::vector<ParamBlock> blocks = conv.param_blocks();
  for (auto& blk : blocks) params.push_back(*blk.value);
  auto rep = fd_check(
      [&](Tape& t, std::vector<int>& leaves) {
        std::vector<ParamBlock> blks = conv.param_blocks();
        for (std::size_t i = 0; i < blks.size(); ++i) *blks[i].value = params[i];
        const int out = conv.forward_tape(t, t.input(X, false));
        leaves = conv.tape_param_nodes();
        return loss_tape(t, LossKind::mse_onehot, out, labels);
      },
      params);
  CHECK(rep.max_rel < 1e-5);
  CHECK(rep.max_abs < 1e-8);
}

TEST_CASE("conv per-sample path agrees with the tape path") {
  Rng rng(12);
  ConvConfig cfg;
  cfg.h = 10;
  cfg.w = 10;
  cfg.c1 = 2;
  cfg.c2 = 2;
  cfg.classes = 3;
  ConvModel conv(cfg, rng);
  const Tensor X = rng.uniform_tensor({3, 10, 10, 1}, 0, 1);
  const Tensor out = conv.forward(X);
  for (std::size_t r = 0; r < 3; ++r) {
    std::vector<double> x(100);
    for (std::size_t i = 0; i < 100; ++i) x[i] = X[r * 100 + i];
    const auto ref = conv.forward_one(x);
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(out[r * 3 + k] == doctest::Approx(ref[k]).epsilon(1e-13));
  }
}

TEST_CASE("lstm with zero parameters returns the readout bias") {
  Rng rng(13);
  LstmConfig cfg;
  cfg.features = 2;
  cfg.window = 1;
  cfg.units = 3;
  LstmModel lstm(cfg, rng);
  for (auto& blk : lstm.param_blocks())
    for (double& v : blk.value->span()) v = 0.0;
  lstm.readout_b()[0] = 0.625;
  const Tensor X = rng.uniform_tensor({4, 1, 2}, -1, 1);
  const Tensor out = lstm.forward(X);
  for (double v : out.span()) CHECK(v == 0.625);
}

TEST_CASE("saturated forget gate with zero candidate keeps the cell constant") {
  Rng rng(14);
  LstmConfig cfg;
  cfg.features = 2;
  cfg.window = 6;
  cfg.units = 2;
  LstmModel lstm(cfg, rng);
  for (auto& blk : lstm.param_blocks())
    for (double& v : blk.value->span()) v = 0.0;
  // forget gate == 1 (sigmoid saturates), candidate == tanh(0) == 0
  lstm.gate_b(1)[0] = 500.0;
  lstm.gate_b(1)[1] = 500.0;
  lstm.readout_b()[0] = 0.0;
  const Tensor X = rng.uniform_tensor({3, 6, 2}, -1, 1);
  // cell stays exactly zero, so the output is exactly the readout bias
  const Tensor out = lstm.forward(X);
  for (double v : out.span()) CHECK(v == 0.0);
}

TEST_CASE("lstm cell state growth bound |c_t| <= t") {
  Rng rng(15);
  LstmConfig cfg;
  cfg.features = 3;
  cfg.window = 12;
  cfg.units = 4;
  LstmModel lstm(cfg, rng);
  // run the recurrence by hand with the model's own weights
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> h(4, 0.0), c(4, 0.0);
    for (int step = 0; step < cfg.window; ++step) {
      std::vector<double> x = {rng.uniform(-3, 3), rng.uniform(-3, 3),
                               rng.uniform(-3, 3)};
      std::vector<double> pre(4 * 4, 0.0);
      for (int g = 0; g < 4; ++g)
        for (int j = 0; j < 4; ++j) {
          double acc = lstm.gate_b(g)[static_cast<std::size_t>(j)];
          for (int fi = 0; fi < 3; ++fi)
            acc += lstm.gate_w(g)[static_cast<std::size_t>(j * 3 + fi)] * x[static_cast<std::size_t>(fi)];
          for (int hj = 0; hj < 4; ++hj)
            acc += lstm.gate_u(g)[static_cast<std::size_t>(j * 4 + hj)] * h[static_cast<std::size_t>(hj)];
          pre[static_cast<std::size_t>(g * 4 + j)] = acc;
        }
      for (int j = 0; j < 4; ++j) {
        const double ig = 1.0 / (1.0 + std::exp(-pre[static_cast<std::size_t>(j)]));
        const double fg = 1.0 / (1.0 + std::exp(-pre[static_cast<std::size_t>(4 + j)]));
        const double gg = std::tanh(pre[static_cast<std::size_t>(8 + j)]);
        const double og = 1.0 / (1.0 + std::exp(-pre[static_cast<std::size_t>(12 + j)]));
        c[static_cast<std::size_t>(j)] = fg * c[static_cast<std::size_t>(j)] + ig * gg;
        h[static_cast<std::size_t>(j)] = og * std::tanh(c[static_cast<std::size_t>(j)]);
        CHECK(std::abs(c[static_cast<std::size_t>(j)]) <= step + 1.0);
        CHECK(std::abs(h[static_cast<std::size_t>(j)]) < 1.0);
      }
    }
  }
}

TEST_CASE("lstm+gmnm gradients match finite differences over 10 steps") {
  Rng rng(16);
  LstmConfig cfg;
  cfg.features = 2;
  cfg.window = 10;
  cfg.units = 2;
  cfg.gmnm_head = true;
  cfg.gmnm_m = 3;
  LstmModel lstm(cfg, rng);
  const Tensor X = rng.uniform_tensor({3, 10, 2}, -1, 1);
  const Tensor Y = rng.uniform_tensor({3, 1}, -1, 1);

  std::vector<Tensor> params;
  for (auto& blk : lstm.param_blocks()) params.push_back(*blk.value);
  auto rep = fd_check(
      [&](Tape& t, std::vector<int>& leaves) {
        std::vector<ParamBlock> blks = lstm.param_blocks();
        for (std::size_t i = 0; i < blks.size(); ++i) *blks[i].value = params[i];
        const int out = lstm.forward_tape(t, t.input(X, false));
        leaves = lstm.tape_param_nodes();
        return t.mse(out, t.input(Y, false));
      },
      params);
  CHECK(rep.max_rel < 1e-5);
  CHECK(rep.max_abs < 1e-8);
}

TEST_CASE("lstm per-sample path agrees with the tape path") {
  Rng rng(17);
  LstmConfig cfg;
  cfg.features = 3;
  cfg.window = 5;
  cfg.units = 3;
  cfg.gmnm_head = true;
  cfg.gmnm_m = 4;
  LstmModel lstm(cfg, rng);
  for (double& v : lstm.head_gmnm()->Pi.span()) v = rng.uniform(-1, 1);
  const Tensor X = rng.uniform_tensor({4, 5, 3}, -1, 1);
  const Tensor out = lstm.forward(X);
  for (std::size_t r = 0; r < 4; ++r) {
    std::vector<double> x(15);
    for (std::size_t i = 0; i < 15; ++i) x[i] = X[r * 15 + i];
    CHECK(out[r] == doctest::Approx(lstm.forward_one(x)[0]).epsilon(1e-12));
  }
}

TEST_CASE("loss values") {
  Tensor p({2, 2}, {1, 2, 3, 4});
  CHECK(loss_value(LossKind::mse, p, p) == 0.0);
  Tensor q({2, 2}, {2, 3, 4, 5});
  CHECK(loss_value(LossKind::mse, q, p) == 1.0);

  Tensor onehot_pred({1, 10});
  onehot_pred[3] = 1.0;
  Tensor label({1}, {3});
  CHECK(loss_value(LossKind::mse_onehot, onehot_pred, label) == 0.0);

  CHECK_THROWS_AS(loss_value(LossKind::mse, p, Tensor({3})), ShapeError);
}
