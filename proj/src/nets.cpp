#include "nets.hpp"

#include <algorithm>
#include <cmath>

namespace gmnmlab {

// ---------------------------------------------------------------- GMNM ----

std::vector<ParamBlock> GmnmModel::param_blocks() {
  const bool staged = !p_.cfg.minimal;
  return {
      {"mu", &p_.mu, p_.cfg.trainable_mu},
      {"A", &p_.A, true},
      {"b", &p_.b, staged},
      {"alpha_raw", &p_.alpha_raw, staged},
      {"beta_raw", &p_.beta_raw, staged},
      {"Pi", &p_.Pi, true},
  };
}

int GmnmModel::forward_tape(Tape& t, int x) {
  const GmnmTapeNodes nd = gmnm_to_tape(t, p_);
  tape_nodes_ = {nd.mu, nd.A, nd.b, nd.alpha_raw, nd.beta_raw, nd.Pi};
  return gmnm_forward_tape(t, p_.cfg, nd, x);
}

int GmnmModel::forward_tape_with_laplacian(Tape& t, int x, int* lap) {
  if (p_.cfg.mode != GmnmMode::ridge)
    throw Error("gmnm Laplacian graph: ridge mode only");
  const GmnmTapeNodes nd = gmnm_to_tape(t, p_);
  tape_nodes_ = {nd.mu, nd.A, nd.b, nd.alpha_raw, nd.beta_raw, nd.Pi};
  return gmnm_forward_tape(t, p_.cfg, nd, x, lap);
}

// ----------------------------------------------------------------- MLP ----

Act act_from_string(const std::string& s) {
  if (s == "tanh") return Act::tanh;
  if (s == "relu") return Act::relu;
  if (s == "silu") return Act::silu;
  throw ConfigError("unknown activation: " + s);
}

std::string act_to_string(Act a) {
  switch (a) {
    case Act::tanh: return "tanh";
    case Act::relu: return "relu";
    case Act::silu: return "silu";
  }
  return "?";
}

MlpModel::MlpModel(MlpConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
  if (cfg_.widths.size() < 2)
    throw ConfigError("mlp needs at least input and output widths");
  for (std::size_t l = 0; l + 1 < cfg_.widths.size(); ++l) {
    const std::size_t in = static_cast<std::size_t>(cfg_.widths[l]);
    const std::size_t out = static_cast<std::size_t>(cfg_.widths[l + 1]);
    const double s = 1.0 / std::sqrt(static_cast<double>(in));
    W_.push_back(rng.uniform_tensor({out, in}, -s, s));
    b_.push_back(Tensor({out}));
  }
}

std::vector<ParamBlock> MlpModel::param_blocks() {
  std::vector<ParamBlock> blocks;
  for (std::size_t l = 0; l < W_.size(); ++l) {
    blocks.push_back({"W" + std::to_string(l), &W_[l], true});
    blocks.push_back({"b" + std::to_string(l), &b_[l], true});
  }
  return blocks;
}

int MlpModel::forward_tape(Tape& t, int x) {
  tape_nodes_.clear();
  int h = x;
  for (std::size_t l = 0; l < W_.size(); ++l) {
    const int wl = t.input(W_[l], true);
    const int bl = t.input(b_[l], true);
    tape_nodes_.push_back(wl);
    tape_nodes_.push_back(bl);
    h = t.add_rowvec(t.matmul_nt(h, wl), bl);
    if (l + 1 < W_.size()) {
      switch (cfg_.act) {
        case Act::tanh: h = t.tanh(h); break;
        case Act::relu: h = t.relu(h); break;
        case Act::silu: h = t.mul(h, t.sigmoid(h)); break;
      }
    }
  }
  return h;
}

int MlpModel::forward_tape_with_laplacian(Tape& t, int x, int* lap) {
  if (cfg_.act != Act::tanh)
    throw Error("mlp Laplacian graph: tanh networks only");
  tape_nodes_.clear();
  const std::size_t B = t.value(x).dim(0);
  const std::size_t d = static_cast<std::size_t>(cfg_.widths.front());

  // Carry value, d directional-derivative channels and the Laplacian channel
  // through every layer; affine layers map all of them by the same weights.
  std::vector<int> D;
  for (std::size_t k = 0; k < d; ++k) {
    Tensor ek({B, d});
    for (std::size_t r = 0; r < B; ++r) ek[r * d + k] = 1.0;
    D.push_back(t.input(std::move(ek), false));
  }
  int lapn = -1;  // identically zero until the first activation
  int h = x;
  for (std::size_t l = 0; l < W_.size(); ++l) {
    const int wl = t.input(W_[l], true);
    const int bl = t.input(b_[l], true);
    tape_nodes_.push_back(wl);
    tape_nodes_.push_back(bl);
    h = t.add_rowvec(t.matmul_nt(h, wl), bl);
    for (std::size_t k = 0; k < d; ++k) D[k] = t.matmul_nt(D[k], wl);
    if (lapn >= 0) lapn = t.matmul_nt(lapn, wl);
    if (l + 1 < W_.size()) {
      const int s = t.tanh(h);
      const int s1 = t.add_const(t.scale(t.square(s), -1.0), 1.0);
      const int s2 = t.scale(t.mul(s, s1), -2.0);
      int sum_d2 = t.square(D[0]);
      for (std::size_t k = 1; k < d; ++k)
        sum_d2 = t.add(sum_d2, t.square(D[k]));
      const int lap_term = t.mul(s2, sum_d2);
      lapn = lapn >= 0 ? t.add(t.mul(s1, lapn), lap_term) : lap_term;
      for (std::size_t k = 0; k < d; ++k) D[k] = t.mul(s1, D[k]);
      h = s;
    }
  }
  *lap = lapn;
  return h;
}

template <class S>
std::vector<S> MlpModel::forward_generic(std::span<const S> x) const {
  using std::tanh;
  std::vector<S> h(x.begin(), x.end());
  for (std::size_t l = 0; l < W_.size(); ++l) {
    const std::size_t in = W_[l].dim(1), out = W_[l].dim(0);
    std::vector<S> next(out);
    for (std::size_t o = 0; o < out; ++o) {
      S acc = b_[l][o];
      const double* wrow = W_[l].data() + o * in;
      for (std::size_t i = 0; i < in; ++i) acc += wrow[i] * h[i];
      next[o] = acc;
    }
    if (l + 1 < W_.size()) {
      for (S& v : next) {
        switch (cfg_.act) {
          case Act::tanh: v = tanh(v); break;
          case Act::relu: v = relu(v); break;
          case Act::silu: v = v * sigmoid(v); break;
        }
      }
    }
    h = std::move(next);
  }
  return h;
}

std::vector<double> MlpModel::forward_one(std::span<const double> x) {
  return forward_generic<double>(x);
}
std::vector<HyperDual> MlpModel::forward_hd(std::span<const HyperDual> x) {
  return forward_generic<HyperDual>(x);
}

// ----------------------------------------------------------------- RBF ----

RbfModel::RbfModel(RbfConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
  const std::size_t m = static_cast<std::size_t>(cfg_.m);
  const std::size_t d = static_cast<std::size_t>(cfg_.d);
  centers_ = Tensor({m, d});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < d; ++k) {
      const auto r = cfg_.domain.empty() ? std::array<double, 2>{-1.0, 1.0}
                                         : cfg_.domain[k];
      centers_[i * d + k] = rng.uniform(r[0], r[1]);
    }
  log_widths_ = Tensor({m});
  weights_ = Tensor({static_cast<std::size_t>(cfg_.out_dim), m});
}

std::vector<ParamBlock> RbfModel::param_blocks() {
  return {{"centers", &centers_, true},
          {"log_widths", &log_widths_, true},
          {"weights", &weights_, true}};
}

int RbfModel::forward_tape(Tape& t, int x) {
  const int c = t.input(centers_, true);
  const int lw = t.input(log_widths_, true);
  const int w = t.input(weights_, true);
  tape_nodes_ = {c, lw, w};
  const int xs = t.sum_rows(t.square(x));                     // [B]
  const int cs = t.sum_rows(t.square(c));                     // [m]
  const int cross = t.scale(t.matmul_nt(x, c), -2.0);         // [B,m]
  const int d2 = t.add_colvec(t.add_rowvec(cross, cs), xs);   // |x-c|^2
  const int gain = t.scale(t.exp(t.scale(lw, -2.0)), -0.5);   // -1/(2 s^2)
  const int e = t.exp(t.mul_rowvec(d2, gain));
  return t.matmul_nt(e, w);
}

template <class S>
std::vector<S> RbfModel::forward_generic(std::span<const S> x) const {
  using std::exp;
  const std::size_t m = static_cast<std::size_t>(cfg_.m);
  const std::size_t d = static_cast<std::size_t>(cfg_.d);
  const std::size_t K = static_cast<std::size_t>(cfg_.out_dim);
  std::vector<S> out(K, S(0.0));
  for (std::size_t i = 0; i < m; ++i) {
    S d2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const S diff = x[k] - centers_[i * d + k];
      d2 += square(diff);
    }
    const double s = std::exp(log_widths_[i]);
    const S f = exp(d2 * (-0.5 / (s * s)));
    for (std::size_t ko = 0; ko < K; ++ko) out[ko] += weights_[ko * m + i] * f;
  }
  return out;
}

std::vector<double> RbfModel::forward_one(std::span<const double> x) {
  return forward_generic<double>(x);
}
std::vector<HyperDual> RbfModel::forward_hd(std::span<const HyperDual> x) {
  return forward_generic<HyperDual>(x);
}

GmnmParams RbfModel::as_quadratic_gmnm() const {
  const std::size_t m = static_cast<std::size_t>(cfg_.m);
  const std::size_t d = static_cast<std::size_t>(cfg_.d);
  GmnmConfig gc;
  gc.d = cfg_.d;
  gc.m = cfg_.m;
  gc.n = cfg_.d;
  gc.out_dim = cfg_.out_dim;
  gc.mode = GmnmMode::quadratic;
  GmnmParams p;
  p.cfg = gc;
  p.mu = centers_;
  p.A = Tensor({m, d, d});
  p.b = Tensor({m, d});
  p.alpha_raw = Tensor({m, d});
  p.beta_raw = Tensor({m});
  p.Pi = weights_;
  for (std::size_t i = 0; i < m; ++i) {
    const double s = std::exp(log_widths_[i]);
    for (std::size_t jn = 0; jn < d; ++jn) {
      p.A[(i * d + jn) * d + jn] = 1.0;  // a_n = e_n
      p.alpha_raw[i * d + jn] = 1.0 / s;  // alpha = 1/s^2 after squaring
    }
  }
  return p;
}

// ---------------------------------------------------------------- conv ----

ConvModel::ConvModel(ConvConfig cfg, Rng& rng) : cfg_(cfg) {
  if (cfg_.feat_h() < 1 || cfg_.feat_w() < 1)
    throw ConfigError("conv stack underflows the input spatially");
  const auto u = [&](std::vector<std::size_t> shape, std::size_t fanin) {
    const double s = 1.0 / std::sqrt(static_cast<double>(fanin));
    return rng.uniform_tensor(std::move(shape), -s, s);
  };
  const std::size_t cin = static_cast<std::size_t>(cfg_.cin);
  const std::size_t c1 = static_cast<std::size_t>(cfg_.c1);
  const std::size_t c2 = static_cast<std::size_t>(cfg_.c2);
  k1_ = u({3, 3, cin, c1}, 9 * cin);
  cb1_ = Tensor({c1});
  k2_ = u({3, 3, c1, c2}, 9 * c1);
  cb2_ = Tensor({c2});
  const std::size_t F = static_cast<std::size_t>(cfg_.feat_dim());
  if (cfg_.head == ConvHead::dense) {
    wd_ = u({static_cast<std::size_t>(cfg_.classes), F}, F);
    bd_ = Tensor({static_cast<std::size_t>(cfg_.classes)});
  } else {
    GmnmConfig gc;
    gc.d = cfg_.feat_dim();
    gc.m = cfg_.gmnm_m;
    gc.n = cfg_.gmnm_n;
    gc.out_dim = cfg_.classes;
    gc.mode = cfg_.gmnm_mode;
    gc.trainable_mu = false;  // centers frozen after initialization
    gc.domain.assign(F, {0.0, 1.0});
    head_gm_ = gmnm_init(gc, rng);
  }
}

std::vector<ParamBlock> ConvModel::param_blocks() {
  std::vector<ParamBlock> blocks = {{"k1", &k1_, true},
                                    {"cb1", &cb1_, true},
                                    {"k2", &k2_, true},
                                    {"cb2", &cb2_, true}};
  if (cfg_.head == ConvHead::dense) {
    blocks.push_back({"wd", &wd_, true});
    blocks.push_back({"bd", &bd_, true});
  } else {
    GmnmParams& g = *head_gm_;
    const bool staged = !g.cfg.minimal;
    blocks.push_back({"head_mu", &g.mu, g.cfg.trainable_mu});
    blocks.push_back({"head_A", &g.A, true});
    blocks.push_back({"head_b", &g.b, staged});
    blocks.push_back({"head_alpha_raw", &g.alpha_raw, staged});
    blocks.push_back({"head_beta_raw", &g.beta_raw, staged});
    blocks.push_back({"head_Pi", &g.Pi, true});
  }
  return blocks;
}

int ConvModel::forward_tape(Tape& t, int x) {
  tape_nodes_.clear();
  const int n1 = t.input(k1_, true);
  const int n2 = t.input(cb1_, true);
  const int n3 = t.input(k2_, true);
  const int n4 = t.input(cb2_, true);
  tape_nodes_ = {n1, n2, n3, n4};
  int h = t.maxpool2x2(t.relu(t.add_chan(t.conv2d(x, n1), n2)));
  h = t.maxpool2x2(t.relu(t.add_chan(t.conv2d(h, n3), n4)));
  const std::size_t B = t.value(h).dim(0);
  const int feat = t.reshape(h, {B, static_cast<std::size_t>(cfg_.feat_dim())});
  if (cfg_.head == ConvHead::dense) {
    const int w = t.input(wd_, true);
    const int b = t.input(bd_, true);
    tape_nodes_.push_back(w);
    tape_nodes_.push_back(b);
    return t.add_rowvec(t.matmul_nt(feat, w), b);
  }
  const GmnmTapeNodes nd = gmnm_to_tape(t, *head_gm_);
  tape_nodes_.insert(tape_nodes_.end(),
                     {nd.mu, nd.A, nd.b, nd.alpha_raw, nd.beta_raw, nd.Pi});
  return gmnm_forward_tape(t, head_gm_->cfg, nd, feat);
}

Tensor ConvModel::features(const Tensor& images) {
  Tape t;
  const int x = t.input(images, false);
  int h = t.maxpool2x2(t.relu(t.add_chan(t.conv2d(x, t.input(k1_, false)),
                                         t.input(cb1_, false))));
  h = t.maxpool2x2(t.relu(t.add_chan(t.conv2d(h, t.input(k2_, false)),
                                     t.input(cb2_, false))));
  return t.value(h).reshaped(
      {images.dim(0), static_cast<std::size_t>(cfg_.feat_dim())});
}

void ConvModel::init_head_mu_from(const Tensor& images, Rng& rng) {
  if (!head_gm_) return;
  const std::size_t m = static_cast<std::size_t>(cfg_.gmnm_m);
  if (images.dim(0) < m)
    throw ConfigError("init_head_mu_from: need at least m images");
  const auto rows = rng.sample_without_replacement(images.dim(0), m);
  const std::size_t px = images.size() / images.dim(0);
  Tensor sel({m, images.dim(1), images.dim(2), images.dim(3)});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < px; ++j)
      sel[i * px + j] = images[rows[i] * px + j];
  head_gm_->mu = features(sel);
}

template <class S>
std::vector<S> ConvModel::forward_generic(std::span<const S> x) const {
  using std::max;
  const int H = cfg_.h, W = cfg_.w, CIN = cfg_.cin;
  auto conv_relu_pool = [](const std::vector<S>& in, int h, int w, int ci,
                           const Tensor& k, const Tensor& bias, int co,
                           std::vector<S>& out, int& oh, int& ow) {
    const int ch = h - 2, cw = w - 2;
    std::vector<S> conv(static_cast<std::size_t>(ch * cw * co), S(0.0));
    for (int oy = 0; oy < ch; ++oy)
      for (int ox = 0; ox < cw; ++ox)
        for (int o = 0; o < co; ++o) {
          S acc = bias[static_cast<std::size_t>(o)];
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx)
              for (int c = 0; c < ci; ++c)
                acc += k[static_cast<std::size_t>(((ky * 3 + kx) * ci + c) *
                                                      co +
                                                  o)] *
                       in[static_cast<std::size_t>(
                           ((oy + ky) * w + ox + kx) * ci + c)];
          conv[static_cast<std::size_t>((oy * cw + ox) * co + o)] = relu(acc);
        }
    oh = ch / 2;
    ow = cw / 2;
    out.assign(static_cast<std::size_t>(oh * ow * co), S(0.0));
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox)
        for (int o = 0; o < co; ++o) {
          S best = conv[static_cast<std::size_t>(
              ((2 * oy) * cw + 2 * ox) * co + o)];
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx)
              best = max(best, conv[static_cast<std::size_t>(
                                   ((2 * oy + dy) * cw + 2 * ox + dx) * co +
                                   o)]);
          out[static_cast<std::size_t>((oy * ow + ox) * co + o)] = best;
        }
  };

  std::vector<S> buf(x.begin(), x.end());
  std::vector<S> next;
  int oh = 0, ow = 0;
  conv_relu_pool(buf, H, W, CIN, k1_, cb1_, cfg_.c1, next, oh, ow);
  std::vector<S> feat;
  int fh = 0, fw = 0;
  conv_relu_pool(next, oh, ow, cfg_.c1, k2_, cb2_, cfg_.c2, feat, fh, fw);

  const std::size_t K = static_cast<std::size_t>(cfg_.classes);
  std::vector<S> out(K, S(0.0));
  if (cfg_.head == ConvHead::dense) {
    const std::size_t F = feat.size();
    for (std::size_t ko = 0; ko < K; ++ko) {
      S acc = bd_[ko];
      const double* wrow = wd_.data() + ko * F;
      for (std::size_t i = 0; i < F; ++i) acc += wrow[i] * feat[i];
      out[ko] = acc;
    }
  } else {
    gmnm_forward_generic<S>(*head_gm_, feat, out);
  }
  return out;
}

std::vector<double> ConvModel::forward_one(std::span<const double> x) {
  return forward_generic<double>(x);
}
std::vector<HyperDual> ConvModel::forward_hd(std::span<const HyperDual> x) {
  return forward_generic<HyperDual>(x);
}

// ---------------------------------------------------------------- LSTM ----

LstmModel::LstmModel(LstmConfig cfg, Rng& rng) : cfg_(cfg) {
  const std::size_t H = static_cast<std::size_t>(cfg_.units);
  const std::size_t F = static_cast<std::size_t>(cfg_.features);
  const double sf = 1.0 / std::sqrt(static_cast<double>(F));
  const double sh = 1.0 / std::sqrt(static_cast<double>(H));
  for (int g = 0; g < 4; ++g) {
    w_[g] = rng.uniform_tensor({H, F}, -sf, sf);
    u_[g] = rng.uniform_tensor({H, H}, -sh, sh);
    gb_[g] = Tensor({H});
  }
  for (std::size_t j = 0; j < H; ++j) gb_[1][j] = 1.0;  // forget-gate bias

  std::size_t readout_in = H;
  if (cfg_.gmnm_head) {
    GmnmConfig gc;
    gc.d = cfg_.units;
    gc.m = cfg_.gmnm_m;
    gc.out_dim = cfg_.gmnm_out > 0 ? cfg_.gmnm_out : cfg_.units;
    gc.mode = cfg_.gmnm_mode;
    gc.trainable_mu = false;  // centers frozen after initialization
    gc.domain.assign(H, {-1.0, 1.0});  // hidden states live in tanh range
    head_gm_ = gmnm_init(gc, rng);
    readout_in = static_cast<std::size_t>(gc.out_dim);
  }
  wr_ = rng.uniform_tensor({1, readout_in},
                           -1.0 / std::sqrt(static_cast<double>(readout_in)),
                           1.0 / std::sqrt(static_cast<double>(readout_in)));
  br_ = Tensor({1});
}

std::vector<ParamBlock> LstmModel::param_blocks() {
  static const char* gate_names[4] = {"i", "f", "g", "o"};
  std::vector<ParamBlock> blocks;
  for (int g = 0; g < 4; ++g) {
    blocks.push_back({std::string("w_") + gate_names[g], &w_[g], true});
    blocks.push_back({std::string("u_") + gate_names[g], &u_[g], true});
    blocks.push_back({std::string("b_") + gate_names[g], &gb_[g], true});
  }
  if (head_gm_) {
    GmnmParams& g = *head_gm_;
    blocks.push_back({"head_mu", &g.mu, g.cfg.trainable_mu});
    blocks.push_back({"head_A", &g.A, true});
    blocks.push_back({"head_b", &g.b, true});
    blocks.push_back({"head_alpha_raw", &g.alpha_raw, true});
    blocks.push_back({"head_beta_raw", &g.beta_raw, true});
    blocks.push_back({"head_Pi", &g.Pi, true});
  }
  blocks.push_back({"wr", &wr_, true});
  blocks.push_back({"br", &br_, true});
  return blocks;
}

int LstmModel::forward_tape(Tape& t, int x) {
  tape_nodes_.clear();
  // copy: pushing nodes below may reallocate the tape's node storage
  const Tensor X = t.value(x);
  if (X.rank() != 3 || X.dim(1) != static_cast<std::size_t>(cfg_.window) ||
      X.dim(2) != static_cast<std::size_t>(cfg_.features))
    throw ShapeError("lstm forward: need [B,T,F] input");
  const std::size_t B = X.dim(0), T = X.dim(1), F = X.dim(2);
  const std::size_t H = static_cast<std::size_t>(cfg_.units);

  int wn[4], un[4], bn[4];
  for (int g = 0; g < 4; ++g) {
    wn[g] = t.input(w_[g], true);
    un[g] = t.input(u_[g], true);
    bn[g] = t.input(gb_[g], true);
    tape_nodes_.insert(tape_nodes_.end(), {wn[g], un[g], bn[g]});
  }

  // Timestep slices become constant leaves; only parameters need adjoints.
  std::vector<int> xt(T);
  for (std::size_t step = 0; step < T; ++step) {
    Tensor slice({B, F});
    for (std::size_t bi = 0; bi < B; ++bi)
      for (std::size_t fi = 0; fi < F; ++fi)
        slice[bi * F + fi] = X[(bi * T + step) * F + fi];
    xt[step] = t.input(std::move(slice), false);
  }

  int h = t.input(Tensor({B, H}), false);
  int c = t.input(Tensor({B, H}), false);
  for (std::size_t step = 0; step < T; ++step) {
    auto gate = [&](int g) {
      return t.add_rowvec(
          t.add(t.matmul_nt(xt[step], wn[g]), t.matmul_nt(h, un[g])), bn[g]);
    };
    const int ig = t.sigmoid(gate(0));
    const int fg = t.sigmoid(gate(1));
    const int gg = t.tanh(gate(2));
    const int og = t.sigmoid(gate(3));
    c = t.add(t.mul(fg, c), t.mul(ig, gg));
    h = t.mul(og, t.tanh(c));
  }

  int readin = h;
  if (head_gm_) {
    const GmnmTapeNodes nd = gmnm_to_tape(t, *head_gm_);
    tape_nodes_.insert(tape_nodes_.end(),
                       {nd.mu, nd.A, nd.b, nd.alpha_raw, nd.beta_raw, nd.Pi});
    readin = gmnm_forward_tape(t, head_gm_->cfg, nd, h);
  }
  const int w = t.input(wr_, true);
  const int b = t.input(br_, true);
  tape_nodes_.push_back(w);
  tape_nodes_.push_back(b);
  return t.add_rowvec(t.matmul_nt(readin, w), b);
}

template <class S>
std::vector<S> LstmModel::forward_generic(std::span<const S> x) const {
  using std::tanh;
  const std::size_t T = static_cast<std::size_t>(cfg_.window);
  const std::size_t F = static_cast<std::size_t>(cfg_.features);
  const std::size_t H = static_cast<std::size_t>(cfg_.units);
  std::vector<S> h(H, S(0.0)), c(H, S(0.0)), pre(4 * H, S(0.0));
  for (std::size_t step = 0; step < T; ++step) {
    const S* xs = x.data() + step * F;
    for (int g = 0; g < 4; ++g)
      for (std::size_t j = 0; j < H; ++j) {
        S acc = gb_[g][j];
        const double* wrow = w_[g].data() + j * F;
        for (std::size_t fi = 0; fi < F; ++fi) acc += wrow[fi] * xs[fi];
        const double* urow = u_[g].data() + j * H;
        for (std::size_t hj = 0; hj < H; ++hj) acc += urow[hj] * h[hj];
        pre[static_cast<std::size_t>(g) * H + j] = acc;
      }
    for (std::size_t j = 0; j < H; ++j) {
      const S ig = sigmoid(pre[j]);
      const S fg = sigmoid(pre[H + j]);
      const S gg = tanh(pre[2 * H + j]);
      const S og = sigmoid(pre[3 * H + j]);
      c[j] = fg * c[j] + ig * gg;
      h[j] = og * tanh(c[j]);
    }
  }
  std::vector<S> readin;
  if (head_gm_) {
    readin.assign(static_cast<std::size_t>(head_gm_->cfg.out_dim), S(0.0));
    gmnm_forward_generic<S>(*head_gm_, h, readin);
  } else {
    readin = std::move(h);
  }
  S out = br_[0];
  for (std::size_t i = 0; i < readin.size(); ++i) out += wr_[i] * readin[i];
  return {out};
}

std::vector<double> LstmModel::forward_one(std::span<const double> x) {
  return forward_generic<double>(x);
}
std::vector<HyperDual> LstmModel::forward_hd(std::span<const HyperDual> x) {
  return forward_generic<HyperDual>(x);
}

// ---------------------------------------------------------------- loss ----

Tensor one_hot(const Tensor& labels, int classes) {
  const std::size_t B = labels.size();
  Tensor out({B, static_cast<std::size_t>(classes)});
  for (std::size_t i = 0; i < B; ++i) {
    const long cls = static_cast<long>(labels[i]);
    if (cls < 0 || cls >= classes)
      throw DataError("one_hot: label out of range");
    out[i * static_cast<std::size_t>(classes) + static_cast<std::size_t>(cls)] =
        1.0;
  }
  return out;
}

double loss_value(LossKind kind, const Tensor& pred, const Tensor& target) {
  const Tensor t =
      kind == LossKind::mse_onehot
          ? one_hot(target, static_cast<int>(pred.dim(pred.rank() - 1)))
          : target;
  if (!pred.same_shape(t)) throw ShapeError("loss: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - t[i];
    acc += d * d;
  }
  const double out = acc / static_cast<double>(pred.size());
  if (!std::isfinite(out)) throw NonFiniteError("loss", -1);
  return out;
}

int loss_tape(Tape& t, LossKind kind, int pred, const Tensor& target) {
  const Tensor& pv = t.value(pred);
  const Tensor tt =
      kind == LossKind::mse_onehot
          ? one_hot(target, static_cast<int>(pv.dim(pv.rank() - 1)))
          : target;
  return t.mse(pred, t.input(tt, false));
}

}  // namespace gmnmlab
