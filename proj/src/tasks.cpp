#include "tasks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "linalg.hpp"

namespace gmnmlab {

namespace {
constexpr double kPi = std::numbers::pi;
}

// ------------------------------------------------------- 2-D fitting ------

std::array<FitLevel, 4> standard_fit_levels() {
  return {FitLevel{0, 0, 0}, FitLevel{5.0, 0, 0}, FitLevel{5.0, 0.1, 0},
          FitLevel{5.0, 0.1, 40.0}};
}

double gaussian_density(std::span<const double> x, std::span<const double> mu,
                        const Tensor& sigma) {
  const std::size_t d = x.size();
  if (mu.size() != d || sigma.rank() != 2 || sigma.dim(0) != d ||
      sigma.dim(1) != d)
    throw ShapeError("gaussian_density: dimension mismatch");
  const double dt = det(sigma);
  if (!(dt > 0.0)) throw DataError("gaussian_density: singular covariance");
  const Tensor inv = inverse(sigma);
  double quad = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      quad += (x[i] - mu[i]) * inv.at(i, j) * (x[j] - mu[j]);
  const double norm =
      std::pow(2.0 * kPi, -0.5 * static_cast<double>(d)) / std::sqrt(dt);
  return norm * std::exp(-0.5 * quad);
}

double target_2d(std::span<const double> x, const FitLevel& level) {
  if (x.size() != 2) throw ShapeError("target_2d: 2-D inputs only");
  double v = std::sin(kPi * x[0]) * std::sin(kPi * x[1]) -
             level.a * (std::sinh(x[0]) + std::sinh(x[1]));
  if (level.b != 0.0 && x[0] >= -3.5 && x[0] <= -2.0 && x[1] >= 2.0 &&
      x[1] <= 3.0)
    v += level.b / 1.5;
  if (level.c != 0.0) {
    // the covariance as printed, asymmetric and all
    static const Tensor sigma({2, 2}, {0.6, 2.0, 1.1, 3.9});
    static const std::array<double, 2> mu{0.0, 0.0};
    v += level.c * gaussian_density(x, mu, sigma);
  }
  return v;
}

Dataset sample_fit_dataset(const FitLevel& level, long n_train, long n_test,
                           Rng& rng) {
  if (n_train < 1 || n_test < 0)
    throw ConfigError("sample_fit_dataset: bad counts");
  const std::size_t n = static_cast<std::size_t>(n_train + n_test);
  Dataset ds;
  ds.inputs = Tensor({n, 2});
  ds.targets = Tensor({n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    const double x0 = rng.uniform(-4.0, 4.0);
    const double x1 = rng.uniform(-4.0, 4.0);
    ds.inputs[2 * i] = x0;
    ds.inputs[2 * i + 1] = x1;
    const std::array<double, 2> x{x0, x1};
    ds.targets[i] = target_2d(x, level);
  }
  for (long i = 0; i < n_train; ++i)
    ds.train_idx.push_back(static_cast<std::size_t>(i));
  for (long i = n_train; i < n_train + n_test; ++i)
    ds.test_idx.push_back(static_cast<std::size_t>(i));
  return ds;
}

// ------------------------------------------------------------ Poisson -----

void PdeConfig::validate() const {
  if (n_interior < 1 || n_boundary < 1 || grid < 1)
    throw ConfigError("pde config: counts must be positive");
}

double pde_rhs(double x, double y) {
  return -2.0 * kPi * kPi * std::sin(kPi * x) * std::sin(kPi * y);
}

double pde_solution(double x, double y) {
  return std::sin(kPi * x) * std::sin(kPi * y);
}

Tensor pde_sample_interior(int n, Rng& rng) {
  Tensor pts({static_cast<std::size_t>(n), 2});
  for (int i = 0; i < n; ++i) {
    pts[2 * static_cast<std::size_t>(i)] = rng.uniform(-1.0, 1.0);
    pts[2 * static_cast<std::size_t>(i) + 1] = rng.uniform(-1.0, 1.0);
  }
  return pts;
}

Tensor pde_sample_boundary(int n, Rng& rng) {
  Tensor pts({static_cast<std::size_t>(n), 2});
  for (int i = 0; i < n; ++i) {
    const std::size_t edge = rng.index(4);
    const double t = rng.uniform(-1.0, 1.0);
    double x = 0, y = 0;
    switch (edge) {
      case 0: x = -1.0; y = t; break;
      case 1: x = 1.0; y = t; break;
      case 2: x = t; y = -1.0; break;
      default: x = t; y = 1.0; break;
    }
    pts[2 * static_cast<std::size_t>(i)] = x;
    pts[2 * static_cast<std::size_t>(i) + 1] = y;
  }
  return pts;
}

std::pair<double, double> pde_losses(Model& model, const PdeConfig& cfg,
                                     Rng& rng) {
  cfg.validate();
  const Tensor xb = pde_sample_boundary(cfg.n_boundary, rng);
  const Tensor xi = pde_sample_interior(cfg.n_interior, rng);

  const Tensor vb = model.forward(xb);
  double boundary = 0.0;
  for (double v : vb.span()) boundary += v * v;
  boundary /= static_cast<double>(vb.size());

  double residual = 0.0;
  for (int i = 0; i < cfg.n_interior; ++i) {
    const std::array<double, 2> x{xi[2 * static_cast<std::size_t>(i)],
                                  xi[2 * static_cast<std::size_t>(i) + 1]};
    const double lap = model.laplacian_eval(x)[0];
    const double diff = lap - pde_rhs(x[0], x[1]);
    residual += diff * diff;
  }
  residual /= static_cast<double>(cfg.n_interior);
  return {boundary, residual};
}

double l2_error(Model& model, int resolution) {
  if (resolution < 1) throw ConfigError("l2_error: resolution must be >= 1");
  const std::size_t r = static_cast<std::size_t>(resolution);
  const std::size_t total = r * r;
  double acc = 0.0;
  const std::size_t chunk = 2048;
  std::vector<double> xs(r);
  for (std::size_t i = 0; i < r; ++i)
    xs[i] = -1.0 + 2.0 * (static_cast<double>(i) + 0.5) /
                       static_cast<double>(r);
  for (std::size_t at = 0; at < total; at += chunk) {
    const std::size_t take = std::min(chunk, total - at);
    Tensor pts({take, 2});
    for (std::size_t k = 0; k < take; ++k) {
      pts[2 * k] = xs[(at + k) / r];
      pts[2 * k + 1] = xs[(at + k) % r];
    }
    const Tensor out = model.forward(pts);
    for (std::size_t k = 0; k < take; ++k) {
      const double diff = out[k] - pde_solution(pts[2 * k], pts[2 * k + 1]);
      acc += diff * diff;
    }
  }
  return std::sqrt(acc / static_cast<double>(total));
}

PdeTask::PdeTask(const PdeConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  boundary_ = pde_sample_boundary(cfg_.n_boundary, rng);
  eval_boundary_ = pde_sample_boundary(cfg_.n_boundary, rng);
  eval_interior_ = pde_sample_interior(cfg_.n_interior, rng);
  rhs_eval_ = Tensor({eval_interior_.dim(0), 1});
  for (std::size_t i = 0; i < eval_interior_.dim(0); ++i)
    rhs_eval_[i] = pde_rhs(eval_interior_[2 * i], eval_interior_[2 * i + 1]);
}

int PdeTask::build_step_loss(Tape& t, Model& model, Rng& rng, long /*step*/) {
  const Tensor interior = pde_sample_interior(cfg_.n_interior, rng);
  const std::size_t nb = boundary_.dim(0), ni = interior.dim(0);
  Tensor both({nb + ni, 2});
  for (std::size_t i = 0; i < nb * 2; ++i) both[i] = boundary_[i];
  for (std::size_t i = 0; i < ni * 2; ++i) both[nb * 2 + i] = interior[i];
  Tensor rhs({ni, 1});
  for (std::size_t i = 0; i < ni; ++i)
    rhs[i] = pde_rhs(interior[2 * i], interior[2 * i + 1]);

  const int x = t.input(std::move(both), false);
  int lap = -1;
  const int out = model.forward_tape_with_laplacian(t, x, &lap);
  const int out_b = t.slice_rows(out, 0, nb);
  const int lap_i = t.slice_rows(lap, nb, ni);
  const int zero = t.input(Tensor({nb, 1}), false);
  return t.add(t.mse(out_b, zero), t.mse(lap_i, t.input(std::move(rhs), false)));
}

double PdeTask::train_loss(Model& model) {
  const Tensor vb = model.forward(eval_boundary_);
  double boundary = 0.0;
  for (double v : vb.span()) boundary += v * v;
  boundary /= static_cast<double>(vb.size());
  double residual = 0.0;
  for (std::size_t i = 0; i < eval_interior_.dim(0); ++i) {
    const std::array<double, 2> x{eval_interior_[2 * i],
                                  eval_interior_[2 * i + 1]};
    const double diff = model.laplacian_eval(x)[0] - rhs_eval_[i];
    residual += diff * diff;
  }
  residual /= static_cast<double>(eval_interior_.dim(0));
  return boundary + residual;
}

double PdeTask::test_loss(Model& model) { return l2_error(model, cfg_.grid); }

std::vector<std::pair<std::string, double>> PdeTask::extras(Model& model) {
  const Tensor vb = model.forward(eval_boundary_);
  double boundary = 0.0;
  for (double v : vb.span()) boundary += v * v;
  boundary /= static_cast<double>(vb.size());
  double residual = 0.0;
  for (std::size_t i = 0; i < eval_interior_.dim(0); ++i) {
    const std::array<double, 2> x{eval_interior_[2 * i],
                                  eval_interior_[2 * i + 1]};
    const double diff = model.laplacian_eval(x)[0] - rhs_eval_[i];
    residual += diff * diff;
  }
  residual /= static_cast<double>(eval_interior_.dim(0));
  return {{"boundary_mse", boundary}, {"residual_mse", residual}};
}

// -------------------------------------------------------- time series -----

void TsConfig::validate() const {
  if (n_samples < 2 || window < 1 || dt <= 0 || t_min >= t_max ||
      split <= 0 || split >= 1)
    throw ConfigError("ts config: bad fields");
  for (double delay : {0.1, 0.2, 0.5}) {
    const double k = delay / dt;
    if (std::abs(k - std::round(k)) > 1e-9)
      throw DataError("ts config: delay " + std::to_string(delay) +
                      " is not a multiple of dt");
  }
}

double ts_signal(const TsConfig& cfg, int i, double t) {
  return cfg.a[static_cast<std::size_t>(i)] * std::sin(t) +
         cfg.b[static_cast<std::size_t>(i)];
}

double ts_target(const TsConfig& cfg, double t) {
  auto x = [&](int i, double at) { return ts_signal(cfg, i, at); };
  return x(2, t) * x(3, t - 0.1) - x(2, t - 0.5) * x(0, t - 0.1) +
         x(3, t) * x(2, t) - x(1, t - 0.5) * x(0, t - 0.2);
}

Dataset ts_generate(const TsConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t n = static_cast<std::size_t>(cfg.n_samples);
  std::vector<double> times(n);
  for (double& t : times) t = rng.uniform(cfg.t_min, cfg.t_max);
  std::sort(times.begin(), times.end());

  const std::size_t w = static_cast<std::size_t>(cfg.window);
  Dataset ds;
  ds.inputs = Tensor({n, w, 4});
  ds.targets = Tensor({n, 1});
  for (std::size_t s = 0; s < n; ++s) {
    const double t = times[s];
    for (std::size_t j = 0; j < w; ++j) {
      const double at = t - static_cast<double>(w - 1 - j) * cfg.dt;
      for (int i = 0; i < 4; ++i)
        ds.inputs[(s * w + j) * 4 + static_cast<std::size_t>(i)] =
            ts_signal(cfg, i, at);
    }
    ds.targets[s] = ts_target(cfg, t);
  }
  const std::size_t n_train =
      static_cast<std::size_t>(std::floor(cfg.split * static_cast<double>(n)));
  for (std::size_t i = 0; i < n; ++i)
    (i < n_train ? ds.train_idx : ds.test_idx).push_back(i);
  return ds;
}

// --------------------------------------------------------------- MNIST ----

namespace {

std::uint32_t read_be32(std::istream& in, const char* what) {
  unsigned char buf[4];
  if (!in.read(reinterpret_cast<char*>(buf), 4))
    throw DataError(std::string("idx: truncated ") + what);
  return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
         (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

}  // namespace

Dataset mnist_load(const std::string& images_path,
                   const std::string& labels_path, long limit) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw DataError("cannot open " + images_path);
  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw DataError("cannot open " + labels_path);

  if (read_be32(imgs, "image magic") != 0x00000803u)
    throw DataError("idx: bad image magic in " + images_path);
  const std::uint32_t n_img = read_be32(imgs, "image count");
  const std::uint32_t rows = read_be32(imgs, "rows");
  const std::uint32_t cols = read_be32(imgs, "cols");

  if (read_be32(labs, "label magic") != 0x00000801u)
    throw DataError("idx: bad label magic in " + labels_path);
  const std::uint32_t n_lab = read_be32(labs, "label count");
  if (n_img != n_lab)
    throw DataError("idx: image/label counts disagree");

  std::uint32_t n = n_img;
  if (limit > 0 && static_cast<std::uint32_t>(limit) < n)
    n = static_cast<std::uint32_t>(limit);

  Dataset ds;
  ds.inputs = Tensor({n, rows, cols, 1});
  ds.targets = Tensor({n});
  std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!imgs.read(reinterpret_cast<char*>(buf.data()),
                   static_cast<std::streamsize>(buf.size())))
      throw DataError("idx: truncated image payload");
    for (std::size_t j = 0; j < buf.size(); ++j)
      ds.inputs[static_cast<std::size_t>(i) * buf.size() + j] =
          static_cast<double>(buf[j]) / 255.0;
    char lab = 0;
    if (!labs.read(&lab, 1)) throw DataError("idx: truncated label payload");
    const int cls = static_cast<unsigned char>(lab);
    if (cls > 9) throw DataError("idx: label out of range");
    ds.targets[i] = static_cast<double>(cls);
  }
  for (std::uint32_t i = 0; i < n; ++i) ds.train_idx.push_back(i);
  return ds;
}

// ------------------------------------------------- synthetic digits -------

namespace {

struct Pt {
  double x, y;
};

using Polyline = std::vector<Pt>;

Polyline seg(Pt a, Pt b) { return {a, b}; }

Polyline arc(Pt c, double rx, double ry, double a0, double a1, int n = 26) {
  Polyline p;
  for (int i = 0; i <= n; ++i) {
    const double a = a0 + (a1 - a0) * static_cast<double>(i) / n;
    p.push_back({c.x + rx * std::cos(a), c.y + ry * std::sin(a)});
  }
  return p;
}

// Stroke tables in a unit box, y pointing down.
const std::vector<std::vector<Polyline>>& digit_strokes() {
  static const std::vector<std::vector<Polyline>> strokes = [] {
    std::vector<std::vector<Polyline>> d(10);
    d[0] = {arc({0.5, 0.5}, 0.30, 0.40, 0, 2 * kPi)};
    d[1] = {seg({0.35, 0.24}, {0.55, 0.08}), seg({0.55, 0.08}, {0.55, 0.92}),
            seg({0.35, 0.92}, {0.75, 0.92})};
    d[2] = {arc({0.5, 0.32}, 0.28, 0.24, -kPi, 0.35),
            seg({0.763, 0.402}, {0.24, 0.9}), seg({0.24, 0.9}, {0.8, 0.9})};
    d[3] = {arc({0.47, 0.30}, 0.25, 0.22, -kPi + 0.4, kPi / 2),
            arc({0.47, 0.67}, 0.28, 0.25, -kPi / 2, kPi - 0.4)};
    d[4] = {seg({0.66, 0.08}, {0.18, 0.62}), seg({0.18, 0.62}, {0.88, 0.62}),
            seg({0.66, 0.30}, {0.66, 0.92})};
    d[5] = {seg({0.78, 0.08}, {0.30, 0.08}), seg({0.30, 0.08}, {0.26, 0.45}),
            arc({0.47, 0.63}, 0.27, 0.26, -2.43, 2.64)};
    d[6] = {arc({0.5, 0.64}, 0.26, 0.27, 0, 2 * kPi),
            seg({0.66, 0.08}, {0.42, 0.38}), seg({0.42, 0.38}, {0.29, 0.60})};
    d[7] = {seg({0.20, 0.08}, {0.80, 0.08}), seg({0.80, 0.08}, {0.45, 0.92}),
            seg({0.38, 0.50}, {0.68, 0.50})};
    d[8] = {arc({0.5, 0.30}, 0.21, 0.20, 0, 2 * kPi),
            arc({0.5, 0.69}, 0.25, 0.23, 0, 2 * kPi)};
    d[9] = {arc({0.5, 0.35}, 0.23, 0.24, 0, 2 * kPi),
            seg({0.73, 0.35}, {0.66, 0.70}), seg({0.66, 0.70}, {0.52, 0.92})};
    return d;
  }();
  return strokes;
}

double dist_to_polyline(double x, double y, const Polyline& p) {
  double best = 1e30;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    const double ax = p[i].x, ay = p[i].y;
    const double bx = p[i + 1].x, by = p[i + 1].y;
    const double dx = bx - ax, dy = by - ay;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0 ? ((x - ax) * dx + (y - ay) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double px = ax + t * dx - x, py = ay + t * dy - y;
    best = std::min(best, px * px + py * py);
  }
  return std::sqrt(best);
}

void render_digit(int digit, Rng& rng, unsigned char* out28x28) {
  const double rot = rng.uniform(-0.22, 0.22);
  const double scale = rng.uniform(0.85, 1.12) * 20.0;
  const double shear = rng.uniform(-0.18, 0.18);
  const double tx = rng.uniform(-2.2, 2.2);
  const double ty = rng.uniform(-2.0, 2.0);
  const double thick = rng.uniform(0.055, 0.105);
  const double bright = rng.uniform(0.80, 1.0);
  const double noise = 0.02;
  const double cosr = std::cos(rot), sinr = std::sin(rot);
  const double aa = 0.8 / scale;  // anti-aliasing width in glyph units

  const auto& strokes = digit_strokes()[static_cast<std::size_t>(digit)];
  for (int py = 0; py < 28; ++py)
    for (int px = 0; px < 28; ++px) {
      const double cx = (px - 13.5 - tx) / scale;
      const double cy = (py - 13.5 - ty) / scale;
      double gx = cosr * cx + sinr * cy;
      const double gy = -sinr * cx + cosr * cy;
      gx -= shear * gy;
      const double u = gx + 0.5, v = gy + 0.5;
      double d = 1e30;
      for (const Polyline& p : strokes)
        d = std::min(d, dist_to_polyline(u, v, p));
      double val = std::clamp(0.5 + (thick - d) / (2.0 * aa), 0.0, 1.0);
      val *= bright;
      // Box-Muller speckle, clipped
      const double u1 = std::max(rng.uniform(), 1e-12);
      const double u2 = rng.uniform();
      val += noise * std::sqrt(-2.0 * std::log(u1)) *
             std::cos(2.0 * kPi * u2);
      out28x28[py * 28 + px] =
          static_cast<unsigned char>(std::lround(255.0 * std::clamp(val, 0.0, 1.0)));
    }
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const unsigned char buf[4] = {
      static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
      static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(buf), 4);
}

void write_digit_files(const std::string& img_path,
                       const std::string& lab_path, long count, Rng& rng) {
  std::ofstream imgs(img_path, std::ios::binary);
  std::ofstream labs(lab_path, std::ios::binary);
  if (!imgs || !labs)
    throw DataError("cannot write synthetic digit files under " + img_path);
  write_be32(imgs, 0x00000803u);
  write_be32(imgs, static_cast<std::uint32_t>(count));
  write_be32(imgs, 28);
  write_be32(imgs, 28);
  write_be32(labs, 0x00000801u);
  write_be32(labs, static_cast<std::uint32_t>(count));
  unsigned char pixels[28 * 28];
  for (long i = 0; i < count; ++i) {
    const int digit = static_cast<int>(rng.index(10));
    render_digit(digit, rng, pixels);
    imgs.write(reinterpret_cast<const char*>(pixels), sizeof(pixels));
    const char lab = static_cast<char>(digit);
    labs.write(&lab, 1);
  }
}

}  // namespace

void synth_digits_write_idx(const std::string& dir, long n_train, long n_test,
                            std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  Rng rng(seed);
  write_digit_files(dir + "/train-images-idx3-ubyte",
                    dir + "/train-labels-idx1-ubyte", n_train, rng);
  write_digit_files(dir + "/t10k-images-idx3-ubyte",
                    dir + "/t10k-labels-idx1-ubyte", n_test, rng);
}

}  // namespace gmnmlab
