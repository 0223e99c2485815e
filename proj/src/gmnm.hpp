#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "hyperdual.hpp"
#include "rng.hpp"
#include "tape.hpp"
#include "tensor.hpp"

namespace gmnmlab {

// Gaussian mixture-inspired nonlinear module: m parallel augmented Gaussian
// projections (AGPs), each centering the input at a learned mu, projecting it
// linearly and mapping the aggregated scalar through a Gaussian bump; the AGP
// outputs are mixed by unconstrained weights Pi (no sum-to-one constraint,
// no density normalization factor).
//
// Two aggregation modes:
//   ridge      y = sum_n alpha_n (a_n.z + b_n) + beta,  f = exp(-y^2/2)
//   quadratic  y = sum_n alpha_n (a_n.z + b_n)^2 + beta, f = exp(-y/2)
//              with alpha = s^2, beta = t^2 kept nonnegative by storing the
//              unconstrained s, t
// The quadratic mode realizes exp(-z^T P z / 2) exactly for any symmetric
// PSD P (see mahalanobis_embed).

enum class GmnmMode { ridge, quadratic };
enum class MuInit { uniform_domain, data_sample };

struct GmnmConfig {
  int d = 1;        // input dimension
  int m = 1;        // number of AGPs
  int n = 0;        // projections per AGP; 0 means n = d
  int out_dim = 1;  // mixture outputs K
  GmnmMode mode = GmnmMode::ridge;
  // Collapsed per-AGP parameterization: n = 1 with alpha == 1, b == beta == 0
  // frozen, so each AGP trains only mu, one projection row and its mixing
  // weight (5 scalars per AGP at d = 2).
  bool minimal = false;
  bool trainable_mu = true;
  MuInit mu_init = MuInit::uniform_domain;
  std::vector<std::array<double, 2>> domain;  // per-dim [lo,hi]; empty = [-1,1]

  int projections() const { return minimal ? 1 : (n > 0 ? n : d); }
  std::array<double, 2> dim_range(int k) const {
    if (domain.empty()) return {-1.0, 1.0};
    return domain[static_cast<std::size_t>(k)];
  }
  void validate() const;
};

struct GmnmParams {
  GmnmConfig cfg;
  Tensor mu;         // [m,d]
  Tensor A;          // [m,n,d]
  Tensor b;          // [m,n]
  Tensor alpha_raw;  // [m,n]; ridge uses it directly, quadratic squares it
  Tensor beta_raw;   // [m]
  Tensor Pi;         // [out_dim,m]

  double alpha_eff(int i, int j) const {
    const double raw = alpha_raw[static_cast<std::size_t>(i) *
                                     static_cast<std::size_t>(cfg.projections()) +
                                 static_cast<std::size_t>(j)];
    return cfg.mode == GmnmMode::quadratic ? raw * raw : raw;
  }
  double beta_eff(int i) const {
    const double raw = beta_raw[static_cast<std::size_t>(i)];
    return cfg.mode == GmnmMode::quadratic ? raw * raw : raw;
  }
};

// Affine collapse of one ridge-mode AGP: y(x) = w.(x - mu_i) + c.
struct RidgeCollapse {
  std::vector<double> w;
  double c = 0.0;
};

// mu from the domain box or sampled training rows (without replacement),
// A ~ U(-1/sqrt(d), 1/sqrt(d)), b = 0, beta_raw = 0, alpha_raw ~ U(0,1)
// (frozen at 1 in minimal mode), Pi = 0 so the untrained module is the zero
// function.
GmnmParams gmnm_init(const GmnmConfig& cfg, Rng& rng,
                     const Tensor* data = nullptr);

// Staged per-sample AGP evaluation; the semantic reference for every other
// path. S is double or HyperDual.
template <class S>
S agp_forward_generic(const GmnmParams& p, int i, std::span<const S> x) {
  using std::exp;
  const int d = p.cfg.d, n = p.cfg.projections();
  const bool quad = p.cfg.mode == GmnmMode::quadratic;
  S y = 0.0;
  for (int jn = 0; jn < n; ++jn) {
    S lp = p.b[static_cast<std::size_t>(i * n + jn)];
    const double* arow = p.A.data() + (i * n + jn) * d;
    const double* murow = p.mu.data() + i * d;
    for (int k = 0; k < d; ++k) lp += arow[k] * (x[k] - murow[k]);
    const double a = p.alpha_eff(i, jn);
    if (quad)
      y += a * square(lp);
    else
      y += a * lp;
  }
  y += p.beta_eff(i);
  return quad ? exp(-0.5 * y) : exp(-0.5 * square(y));
}

double agp_forward(const GmnmParams& p, int i, std::span<const double> x);

template <class S>
void gmnm_forward_generic(const GmnmParams& p, std::span<const S> x,
                          std::span<S> out) {
  const int m = p.cfg.m, K = p.cfg.out_dim;
  for (int k = 0; k < K; ++k) out[k] = 0.0;
  for (int i = 0; i < m; ++i) {
    const S f = agp_forward_generic(p, i, x);
    for (int k = 0; k < K; ++k) out[k] += p.Pi[k * m + i] * f;
  }
}

std::vector<double> gmnm_forward(const GmnmParams& p,
                                 std::span<const double> x);

// Closed-form input derivatives of the mixture output, ridge mode only
// (quadratic callers go through the tape or hyperduals).
Tensor gmnm_input_gradient(const GmnmParams& p, std::span<const double> x);
std::vector<double> gmnm_input_laplacian(const GmnmParams& p,
                                         std::span<const double> x);

RidgeCollapse collapse_ridge(const GmnmParams& p, int i);

// Evaluation through the collapse; agrees with the staged path to a few ulp.
double agp_forward_collapsed(const GmnmParams& p, int i,
                             std::span<const double> x);

// Single quadratic AGP realizing y(z) = z^T P z from the spectral
// decomposition of a symmetric PSD matrix (a_n = v_n, alpha_n = lambda_n).
GmnmParams mahalanobis_embed(const Tensor& P);

// Trainable scalar count for a config (frozen mu excluded).
long count_params(const GmnmConfig& cfg);

// --- tape integration -------------------------------------------------

struct GmnmTapeNodes {
  int mu = -1, A = -1, b = -1, alpha_raw = -1, beta_raw = -1, Pi = -1;
};

GmnmTapeNodes gmnm_to_tape(Tape& t, const GmnmParams& p);

// Batched mixture output [B,K] from input node x [B,d]. If lap_out is
// non-null (ridge only) it also receives the [B,K] Laplacian node, sharing
// the forward subgraph.
int gmnm_forward_tape(Tape& t, const GmnmConfig& cfg, const GmnmTapeNodes& nd,
                      int x, int* lap_out = nullptr);

}  // namespace gmnmlab
