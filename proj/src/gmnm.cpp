#include "gmnm.hpp"

#include <algorithm>
#include <cmath>

#include "linalg.hpp"

namespace gmnmlab {

void GmnmConfig::validate() const {
  if (d < 1 || m < 1 || out_dim < 1 || (n != 0 && n < 1))
    throw ConfigError("gmnm config: d, m, n, out_dim must be positive");
  if (minimal && n > 1)
    throw ConfigError("gmnm config: minimal mode fixes n = 1");
  if (!domain.empty() && domain.size() != static_cast<std::size_t>(d))
    throw ConfigError("gmnm config: domain box must list one range per dim");
  for (const auto& r : domain)
    if (!(r[0] < r[1])) throw ConfigError("gmnm config: empty domain range");
}

GmnmParams gmnm_init(const GmnmConfig& cfg, Rng& rng, const Tensor* data) {
  cfg.validate();
  const std::size_t m = static_cast<std::size_t>(cfg.m);
  const std::size_t d = static_cast<std::size_t>(cfg.d);
  const std::size_t n = static_cast<std::size_t>(cfg.projections());

  GmnmParams p;
  p.cfg = cfg;
  p.mu = Tensor({m, d});
  if (cfg.mu_init == MuInit::data_sample) {
    if (data == nullptr || data->rank() != 2 || data->dim(1) != d)
      throw ConfigError("gmnm_init: data_sample needs an [N,d] tensor");
    if (data->dim(0) < m)
      throw ConfigError("gmnm_init: data_sample needs at least m rows");
    const auto rows = rng.sample_without_replacement(data->dim(0), m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < d; ++k)
        p.mu[i * d + k] = data->at(rows[i], k);
  } else {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < d; ++k) {
        const auto r = cfg.dim_range(static_cast<int>(k));
        p.mu[i * d + k] = rng.uniform(r[0], r[1]);
      }
  }

  const double a_scale = 1.0 / std::sqrt(static_cast<double>(d));
  p.A = rng.uniform_tensor({m, n, d}, -a_scale, a_scale);
  p.b = Tensor({m, n});
  p.beta_raw = Tensor({m});
  p.alpha_raw = cfg.minimal ? Tensor::full({m, n}, 1.0)
                            : rng.uniform_tensor({m, n}, 0.0, 1.0);
  p.Pi = Tensor({static_cast<std::size_t>(cfg.out_dim), m});
  return p;
}

double agp_forward(const GmnmParams& p, int i, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(p.cfg.d))
    throw ShapeError("agp_forward: input dimension mismatch");
  return agp_forward_generic<double>(p, i, x);
}

std::vector<double> gmnm_forward(const GmnmParams& p,
                                 std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(p.cfg.d))
    throw ShapeError("gmnm_forward: input dimension mismatch");
  std::vector<double> out(static_cast<std::size_t>(p.cfg.out_dim));
  gmnm_forward_generic<double>(p, x, out);
  return out;
}

RidgeCollapse collapse_ridge(const GmnmParams& p, int i) {
  if (p.cfg.mode != GmnmMode::ridge)
    throw Error("collapse_ridge: ridge mode only");
  const int d = p.cfg.d, n = p.cfg.projections();
  RidgeCollapse rc;
  rc.w.assign(static_cast<std::size_t>(d), 0.0);
  rc.c = 0.0;
  for (int jn = 0; jn < n; ++jn) {
    const double a = p.alpha_eff(i, jn);
    const double* arow = p.A.data() + (i * n + jn) * d;
    for (int k = 0; k < d; ++k) rc.w[static_cast<std::size_t>(k)] += a * arow[k];
    rc.c += a * p.b[static_cast<std::size_t>(i * n + jn)];
  }
  rc.c += p.beta_eff(i);
  return rc;
}

double agp_forward_collapsed(const GmnmParams& p, int i,
                             std::span<const double> x) {
  const RidgeCollapse rc = collapse_ridge(p, i);
  const int d = p.cfg.d;
  double y = 0.0;
  for (int k = 0; k < d; ++k)
    y += rc.w[static_cast<std::size_t>(k)] * (x[k] - p.mu[i * d + k]);
  y += rc.c;
  return std::exp(-0.5 * y * y);
}

Tensor gmnm_input_gradient(const GmnmParams& p, std::span<const double> x) {
  if (p.cfg.mode != GmnmMode::ridge)
    throw Error("gmnm_input_gradient: ridge mode only (use the tape instead)");
  if (x.size() != static_cast<std::size_t>(p.cfg.d))
    throw ShapeError("gmnm_input_gradient: input dimension mismatch");
  const int m = p.cfg.m, d = p.cfg.d, K = p.cfg.out_dim;
  Tensor out({static_cast<std::size_t>(K), static_cast<std::size_t>(d)});
  for (int i = 0; i < m; ++i) {
    const RidgeCollapse rc = collapse_ridge(p, i);
    double y = rc.c;
    for (int k = 0; k < d; ++k)
      y += rc.w[static_cast<std::size_t>(k)] * (x[k] - p.mu[i * d + k]);
    const double f = std::exp(-0.5 * y * y);
    for (int ko = 0; ko < K; ++ko) {
      const double coef = p.Pi[static_cast<std::size_t>(ko * m + i)] * f * (-y);
      for (int j = 0; j < d; ++j)
        out[static_cast<std::size_t>(ko * d + j)] +=
            coef * rc.w[static_cast<std::size_t>(j)];
    }
  }
  return out;
}

std::vector<double> gmnm_input_laplacian(const GmnmParams& p,
                                         std::span<const double> x) {
  if (p.cfg.mode != GmnmMode::ridge)
    throw Error("gmnm_input_laplacian: ridge mode only (use the tape instead)");
  if (x.size() != static_cast<std::size_t>(p.cfg.d))
    throw ShapeError("gmnm_input_laplacian: input dimension mismatch");
  const int m = p.cfg.m, d = p.cfg.d, K = p.cfg.out_dim;
  std::vector<double> out(static_cast<std::size_t>(K), 0.0);
  for (int i = 0; i < m; ++i) {
    const RidgeCollapse rc = collapse_ridge(p, i);
    double y = rc.c, w2 = 0.0;
    for (int k = 0; k < d; ++k) {
      y += rc.w[static_cast<std::size_t>(k)] * (x[k] - p.mu[i * d + k]);
      w2 += rc.w[static_cast<std::size_t>(k)] * rc.w[static_cast<std::size_t>(k)];
    }
    const double f = std::exp(-0.5 * y * y);
    const double lap = f * (y * y - 1.0) * w2;
    for (int ko = 0; ko < K; ++ko)
      out[static_cast<std::size_t>(ko)] +=
          p.Pi[static_cast<std::size_t>(ko * m + i)] * lap;
  }
  return out;
}

GmnmParams mahalanobis_embed(const Tensor& P) {
  if (P.rank() != 2 || P.dim(0) != P.dim(1))
    throw ShapeError("mahalanobis_embed: square matrix required");
  const std::size_t d = P.dim(0);
  double scale = 0.0;
  for (double v : P.span()) scale = std::max(scale, std::abs(v));
  if (!is_symmetric(P, 1e-12 * std::max(scale, 1.0)))
    throw Error("mahalanobis_embed: matrix is not symmetric");

  const EigenSym es = eigh(P);
  for (double lam : es.values)
    if (lam < -1e-10) throw Error("mahalanobis_embed: matrix is indefinite");

  GmnmConfig cfg;
  cfg.d = static_cast<int>(d);
  cfg.m = 1;
  cfg.n = static_cast<int>(d);
  cfg.out_dim = 1;
  cfg.mode = GmnmMode::quadratic;
  cfg.trainable_mu = false;

  GmnmParams p;
  p.cfg = cfg;
  p.mu = Tensor({1, d});
  p.A = Tensor({1, d, d});
  p.b = Tensor({1, d});
  p.alpha_raw = Tensor({1, d});
  p.beta_raw = Tensor({1});
  p.Pi = Tensor::full({1, 1}, 1.0);
  for (std::size_t jn = 0; jn < d; ++jn) {
    const double lam = std::max(es.values[jn], 0.0);
    p.alpha_raw[jn] = std::sqrt(lam);
    for (std::size_t k = 0; k < d; ++k)
      p.A[jn * d + k] = es.vectors.at(k, jn);  // a_n = eigenvector v_n
  }
  return p;
}

long count_params(const GmnmConfig& cfg) {
  cfg.validate();
  const long d = cfg.d, m = cfg.m, n = cfg.projections();
  long per_agp = cfg.trainable_mu ? d : 0;
  if (cfg.minimal)
    per_agp += d;  // the collapsed projection row
  else
    per_agp += n * d + n + n + 1;  // A, b, alpha, beta
  return m * per_agp + static_cast<long>(cfg.out_dim) * m;
}

GmnmTapeNodes gmnm_to_tape(Tape& t, const GmnmParams& p) {
  GmnmTapeNodes nd;
  const bool staged = !p.cfg.minimal;
  nd.mu = t.input(p.mu, p.cfg.trainable_mu);
  nd.A = t.input(p.A, true);
  nd.b = t.input(p.b, staged);
  nd.alpha_raw = t.input(p.alpha_raw, staged);
  nd.beta_raw = t.input(p.beta_raw, staged);
  nd.Pi = t.input(p.Pi, true);
  return nd;
}

int gmnm_forward_tape(Tape& t, const GmnmConfig& cfg, const GmnmTapeNodes& nd,
                      int x, int* lap_out) {
  const std::size_t m = static_cast<std::size_t>(cfg.m);
  const std::size_t d = static_cast<std::size_t>(cfg.d);
  const std::size_t n = static_cast<std::size_t>(cfg.projections());

  if (cfg.mode == GmnmMode::ridge) {
    // Collapse the two-stage projection (exact algebra): W = alpha.A row
    // blocks, offset c = alpha.b + beta, centering shift s = W.mu.
    const int W = t.batch_vecmat(nd.alpha_raw, nd.A);                // [m,d]
    const int c = t.add(t.sum_rows(t.mul(nd.alpha_raw, nd.b)), nd.beta_raw);
    const int s = t.sum_rows(t.mul(W, nd.mu));                       // [m]
    const int Y = t.add_rowvec(t.matmul_nt(x, W), t.sub(c, s));      // [B,m]
    const int F = t.exp(t.scale(t.square(Y), -0.5));
    const int G = t.matmul_nt(F, nd.Pi);                             // [B,K]
    if (lap_out != nullptr) {
      const int w2 = t.sum_rows(t.square(W));                        // [m]
      const int T = t.mul(F, t.add_const(t.square(Y), -1.0));        // [B,m]
      *lap_out = t.matmul_nt(t.mul_rowvec(T, w2), nd.Pi);            // [B,K]
    }
    return G;
  }

  if (lap_out != nullptr)
    throw Error("gmnm_forward_tape: Laplacian graph is ridge-mode only");

  const int alpha = t.square(nd.alpha_raw);  // [m,n]
  const int beta = t.square(nd.beta_raw);    // [m]
  const int Af = t.reshape(nd.A, {m * n, d});
  const int XA = t.matmul_nt(x, Af);                              // [B,m*n]
  const int off = t.reshape(t.sub(nd.b, t.batch_matvec(nd.A, nd.mu)), {m * n});
  const int LP = t.add_rowvec(XA, off);
  const int SA = t.mul_rowvec(t.square(LP), t.reshape(alpha, {m * n}));
  const int Y = t.add_rowvec(t.sum_groups(SA, n), beta);          // [B,m]
  const int F = t.exp(t.scale(Y, -0.5));
  return t.matmul_nt(F, nd.Pi);
}

}  // namespace gmnmlab
