#pragma once

#include <array>
#include <string>
#include <vector>

#include "model.hpp"
#include "optim.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace gmnmlab {

// ------------------------------------------------------- 2-D fitting ------

struct FitLevel {
  double a = 0.0, b = 0.0, c = 0.0;
};

// The four benchmark difficulty levels, easiest first.
std::array<FitLevel, 4> standard_fit_levels();

// sin(pi x1) sin(pi x2) - a (sinh x1 + sinh x2) + b U(x) + c N(x) with the
// box bump U = 1/1.5 on [-3.5,-2] x [2,3] and the printed (asymmetric)
// covariance used verbatim inside the density.
double target_2d(std::span<const double> x, const FitLevel& level);

// Full multivariate normal density, normalization included. Used as a target
// ingredient and as a test oracle only; the mixture layer never computes it.
double gaussian_density(std::span<const double> x, std::span<const double> mu,
                        const Tensor& sigma);

// Fixed train/test partition over row-major inputs/targets.
struct Dataset {
  Tensor inputs;
  Tensor targets;
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  std::uint64_t seed = 0;

  Tensor train_inputs() const { return gather_rows(inputs, train_idx); }
  Tensor train_targets() const { return gather_rows(targets, train_idx); }
  Tensor test_inputs() const { return gather_rows(inputs, test_idx); }
  Tensor test_targets() const { return gather_rows(targets, test_idx); }
};

// Uniform draws over [-4,4]^2 (the domain contains the U box); train rows
// first, test rows after, both from the same stream.
Dataset sample_fit_dataset(const FitLevel& level, long n_train, long n_test,
                           Rng& rng);

// ------------------------------------------------------------ Poisson -----

struct PdeConfig {
  int n_interior = 1024;  // collocation points, resampled every step
  int n_boundary = 256;   // boundary points, fixed per run
  int grid = 101;         // evaluation grid resolution
  void validate() const;
};

// Lap u = -2 pi^2 sin(pi x) sin(pi y) on [-1,1]^2 with zero boundary values;
// the reference solution is sin(pi x) sin(pi y).
double pde_rhs(double x, double y);
double pde_solution(double x, double y);

Tensor pde_sample_interior(int n, Rng& rng);
Tensor pde_sample_boundary(int n, Rng& rng);

// (boundary_mse, residual_mse) on freshly sampled points: boundary values
// against zero, Laplacian against the analytic right-hand side. The model's
// own Laplacian route is used (closed form for ridge GMNM, hyperduals for
// MLPs).
std::pair<double, double> pde_losses(Model& model, const PdeConfig& cfg,
                                     Rng& rng);

// Root-mean-square error against the reference solution on a cell-centered
// resolution x resolution grid over [-1,1]^2 (resolution 1 probes the
// center point).
double l2_error(Model& model, int resolution);

// Physics-informed training task: loss = boundary MSE + residual MSE, with
// the residual built through the model's tape Laplacian. Reported train loss
// is the combined loss on fixed evaluation sets; reported test loss is the
// grid L2 error.
class PdeTask : public TrainTask {
 public:
  PdeTask(const PdeConfig& cfg, Rng& rng);
  int build_step_loss(Tape& t, Model& model, Rng& rng, long step) override;
  double train_loss(Model& model) override;
  double test_loss(Model& model) override;
  std::vector<std::pair<std::string, double>> extras(Model& model) override;

 private:
  PdeConfig cfg_;
  Tensor boundary_;      // fixed training boundary points
  Tensor eval_interior_; // fixed evaluation sets
  Tensor eval_boundary_;
  Tensor rhs_eval_;      // rhs at eval_interior_
};

// -------------------------------------------------------- time series -----

struct TsConfig {
  std::array<double, 4> a{1.0, 0.8, 1.2, 0.6};
  std::array<double, 4> b{0.5, -0.3, 0.2, 0.9};
  long n_samples = 10000;
  double split = 0.8;  // chronological train fraction
  double t_min = 0.5, t_max = 100.0;
  int window = 10;
  double dt = 0.1;
  void validate() const;  // the target's delays must sit on the lag grid
};

double ts_signal(const TsConfig& cfg, int i, double t);  // x_i(t)
double ts_target(const TsConfig& cfg, double t);         // y(t)

// Draws n sample times uniformly over [t_min, t_max], sorts them, and emits
// windows of the four signals at lags {0..window-1} dt (oldest row first,
// evaluated analytically) with y(t) as target; chronological 80/20 split.
Dataset ts_generate(const TsConfig& cfg, Rng& rng);

// --------------------------------------------------------------- MNIST ----

// IDX container parsing (big-endian magic + extents + u8 payload). Images
// come back as [N,rows,cols,1] scaled to [0,1]; labels as a [N] tensor of
// 0..9. limit > 0 truncates to the first `limit` examples.
Dataset mnist_load(const std::string& images_path,
                   const std::string& labels_path, long limit = 0);

// Writes a synthetic handwritten-digit-style dataset in IDX format
// (train-images-idx3-ubyte etc. under dir): procedurally rendered glyphs
// with random affine jitter, stroke width and noise. Deterministic in seed.
void synth_digits_write_idx(const std::string& dir, long n_train, long n_test,
                            std::uint64_t seed);

}  // namespace gmnmlab
