#pragma once

#include <memory>
#include <optional>

#include "gmnm.hpp"
#include "model.hpp"
#include "rng.hpp"

namespace gmnmlab {

// ---------------------------------------------------------------- GMNM ----

class GmnmModel : public Model {
 public:
  GmnmModel(const GmnmConfig& cfg, Rng& rng, const Tensor* data = nullptr)
      : p_(gmnm_init(cfg, rng, data)) {}
  explicit GmnmModel(GmnmParams p) : p_(std::move(p)) {}

  std::string kind() const override { return "gmnm"; }
  std::vector<ParamBlock> param_blocks() override;
  int output_dim() const override { return p_.cfg.out_dim; }
  std::vector<std::size_t> input_shape() const override {
    return {static_cast<std::size_t>(p_.cfg.d)};
  }
  int forward_tape(Tape& t, int x) override;
  int forward_tape_with_laplacian(Tape& t, int x, int* lap) override;
  std::vector<double> forward_one(std::span<const double> x) override {
    return gmnm_forward(p_, x);
  }
  std::vector<HyperDual> forward_hd(std::span<const HyperDual> x) override {
    std::vector<HyperDual> out(static_cast<std::size_t>(p_.cfg.out_dim));
    gmnm_forward_generic<HyperDual>(p_, x, out);
    return out;
  }
  std::vector<double> laplacian_eval(std::span<const double> x) override {
    if (p_.cfg.mode == GmnmMode::ridge) return gmnm_input_laplacian(p_, x);
    return Model::laplacian_eval(x);
  }

  GmnmParams& params() { return p_; }
  const GmnmParams& params() const { return p_; }

 private:
  GmnmParams p_;
};

// ----------------------------------------------------------------- MLP ----

enum class Act { tanh, relu, silu };

Act act_from_string(const std::string& s);
std::string act_to_string(Act a);

struct MlpConfig {
  std::vector<int> widths;  // e.g. {2, 50, 50, 50, 1}
  Act act = Act::tanh;
};

class MlpModel : public Model {
 public:
  MlpModel(MlpConfig cfg, Rng& rng);
  MlpModel(MlpConfig cfg, std::vector<Tensor> W, std::vector<Tensor> b)
      : cfg_(std::move(cfg)), W_(std::move(W)), b_(std::move(b)) {}

  std::string kind() const override { return "mlp"; }
  std::vector<ParamBlock> param_blocks() override;
  int output_dim() const override { return cfg_.widths.back(); }
  std::vector<std::size_t> input_shape() const override {
    return {static_cast<std::size_t>(cfg_.widths.front())};
  }
  int forward_tape(Tape& t, int x) override;
  // Forward value/gradient/Laplacian propagation through the layers;
  // tanh networks only.
  int forward_tape_with_laplacian(Tape& t, int x, int* lap) override;
  std::vector<double> forward_one(std::span<const double> x) override;
  std::vector<HyperDual> forward_hd(std::span<const HyperDual> x) override;

  const MlpConfig& config() const { return cfg_; }
  std::vector<Tensor>& weights() { return W_; }
  std::vector<Tensor>& biases() { return b_; }

 private:
  template <class S>
  std::vector<S> forward_generic(std::span<const S> x) const;

  MlpConfig cfg_;
  std::vector<Tensor> W_;  // [out,in] per layer
  std::vector<Tensor> b_;  // [out] per layer
};

// ----------------------------------------------------------------- RBF ----

struct RbfConfig {
  int d = 1, m = 1, out_dim = 1;
  std::vector<std::array<double, 2>> domain;  // center init box
};

// Isotropic Gaussian RBF: out_k = sum_i w_ki exp(-|x - c_i|^2 / (2 s_i^2)),
// widths kept positive as s = exp(log_width).
class RbfModel : public Model {
 public:
  RbfModel(RbfConfig cfg, Rng& rng);

  std::string kind() const override { return "rbf"; }
  std::vector<ParamBlock> param_blocks() override;
  int output_dim() const override { return cfg_.out_dim; }
  std::vector<std::size_t> input_shape() const override {
    return {static_cast<std::size_t>(cfg_.d)};
  }
  int forward_tape(Tape& t, int x) override;
  std::vector<double> forward_one(std::span<const double> x) override;
  std::vector<HyperDual> forward_hd(std::span<const HyperDual> x) override;

  const RbfConfig& config() const { return cfg_; }
  Tensor& centers() { return centers_; }
  Tensor& log_widths() { return log_widths_; }
  Tensor& weights() { return weights_; }

  // The equivalent quadratic-mode GMNM (per-component spectral embedding of
  // P = I / s_i^2); outputs match on every input.
  GmnmParams as_quadratic_gmnm() const;

 private:
  template <class S>
  std::vector<S> forward_generic(std::span<const S> x) const;

  RbfConfig cfg_;
  Tensor centers_;     // [m,d]
  Tensor log_widths_;  // [m]
  Tensor weights_;     // [out,m]
};

// ---------------------------------------------------------------- conv ----

enum class ConvHead { dense, gmnm };

struct ConvConfig {
  int h = 28, w = 28, cin = 1;
  int c1 = 16, c2 = 32;  // channels of the two 3x3 valid conv layers
  int classes = 10;
  ConvHead head = ConvHead::dense;
  int gmnm_m = 10, gmnm_n = 1;  // head AGPs / projections per AGP
  GmnmMode gmnm_mode = GmnmMode::ridge;

  int feat_h() const { return ((h - 2) / 2 - 2) / 2; }
  int feat_w() const { return ((w - 2) / 2 - 2) / 2; }
  int feat_dim() const { return feat_h() * feat_w() * c2; }
};

// Two 3x3 valid convolutions with relu and 2x2 max-pool, flatten, then a
// dense or GMNM classification head.
class ConvModel : public Model {
 public:
  ConvModel(ConvConfig cfg, Rng& rng);

  std::string kind() const override { return "conv"; }
  std::vector<ParamBlock> param_blocks() override;
  int output_dim() const override { return cfg_.classes; }
  std::vector<std::size_t> input_shape() const override {
    return {static_cast<std::size_t>(cfg_.h), static_cast<std::size_t>(cfg_.w),
            static_cast<std::size_t>(cfg_.cin)};
  }
  int forward_tape(Tape& t, int x) override;
  std::vector<double> forward_one(std::span<const double> x) override;
  std::vector<HyperDual> forward_hd(std::span<const HyperDual> x) override;

  // GMNM-head centers are sampled in feature space: push m random training
  // images through the freshly initialized conv stack and freeze the
  // resulting feature vectors as mu.
  void init_head_mu_from(const Tensor& images, Rng& rng);

  const ConvConfig& config() const { return cfg_; }
  GmnmParams* head_gmnm() { return head_gm_ ? &*head_gm_ : nullptr; }

 private:
  template <class S>
  std::vector<S> forward_generic(std::span<const S> x) const;
  Tensor features(const Tensor& images);  // [B, feat_dim]

  ConvConfig cfg_;
  Tensor k1_, cb1_, k2_, cb2_;
  Tensor wd_, bd_;                 // dense head
  std::optional<GmnmParams> head_gm_;  // gmnm head
};

// ---------------------------------------------------------------- LSTM ----

struct LstmConfig {
  int features = 4;
  int window = 10;  // unrolled steps
  int units = 3;
  bool gmnm_head = false;
  int gmnm_m = 100;
  int gmnm_out = 0;  // 0: match units
  GmnmMode gmnm_mode = GmnmMode::ridge;
};

// Standard LSTM cell unrolled over the window; the last hidden state goes
// through an optional GMNM block, then a dense readout to one output.
class LstmModel : public Model {
 public:
  LstmModel(LstmConfig cfg, Rng& rng);

  std::string kind() const override { return "lstm"; }
  std::vector<ParamBlock> param_blocks() override;
  int output_dim() const override { return 1; }
  std::vector<std::size_t> input_shape() const override {
    return {static_cast<std::size_t>(cfg_.window),
            static_cast<std::size_t>(cfg_.features)};
  }
  int forward_tape(Tape& t, int x) override;
  std::vector<double> forward_one(std::span<const double> x) override;
  std::vector<HyperDual> forward_hd(std::span<const HyperDual> x) override;

  const LstmConfig& config() const { return cfg_; }
  GmnmParams* head_gmnm() { return head_gm_ ? &*head_gm_ : nullptr; }
  Tensor& gate_w(int g) { return w_[g]; }
  Tensor& gate_u(int g) { return u_[g]; }
  Tensor& gate_b(int g) { return gb_[g]; }
  Tensor& readout_w() { return wr_; }
  Tensor& readout_b() { return br_; }

 private:
  template <class S>
  std::vector<S> forward_generic(std::span<const S> x) const;

  LstmConfig cfg_;
  // gate order: input, forget, cell candidate, output
  Tensor w_[4];   // [units, features]
  Tensor u_[4];   // [units, units]
  Tensor gb_[4];  // [units]
  std::optional<GmnmParams> head_gm_;
  Tensor wr_;  // [1, readout_in]
  Tensor br_;  // [1]
};

// ---------------------------------------------------------------- loss ----

enum class LossKind { mse, mse_onehot };

Tensor one_hot(const Tensor& labels, int classes);

// Mean over all elements of the squared difference. For mse_onehot the
// integer labels are expanded to one-hot rows first.
double loss_value(LossKind kind, const Tensor& pred, const Tensor& target);
int loss_tape(Tape& t, LossKind kind, int pred, const Tensor& target);

}  // namespace gmnmlab
