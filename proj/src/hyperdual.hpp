#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace gmnmlab {

// Second-order truncated Taylor scalar along one direction: carries a value
// plus exact first and second directional derivatives. Seeding d1=1 on input
// coordinate k and running any composition of the ops below yields df/dx_k
// and d2f/dx_k2 with no truncation error; summing d2 over k gives Laplacians.
struct HyperDual {
  double v = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;

  HyperDual() = default;
  HyperDual(double value) : v(value) {}  // NOLINT: implicit from constants
  HyperDual(double value, double first, double second)
      : v(value), d1(first), d2(second) {}

  static HyperDual seed(double value) { return {value, 1.0, 0.0}; }
};

inline HyperDual operator+(const HyperDual& a, const HyperDual& b) {
  return {a.v + b.v, a.d1 + b.d1, a.d2 + b.d2};
}
inline HyperDual operator-(const HyperDual& a, const HyperDual& b) {
  return {a.v - b.v, a.d1 - b.d1, a.d2 - b.d2};
}
inline HyperDual operator-(const HyperDual& a) { return {-a.v, -a.d1, -a.d2}; }
inline HyperDual operator*(const HyperDual& a, const HyperDual& b) {
  return {a.v * b.v, a.d1 * b.v + a.v * b.d1,
          a.d2 * b.v + 2.0 * a.d1 * b.d1 + a.v * b.d2};
}
inline HyperDual& operator+=(HyperDual& a, const HyperDual& b) {
  a = a + b;
  return a;
}
inline HyperDual& operator-=(HyperDual& a, const HyperDual& b) {
  a = a - b;
  return a;
}
inline HyperDual& operator*=(HyperDual& a, const HyperDual& b) {
  a = a * b;
  return a;
}

// Univariate chain rule: f(u) = {f, f'.u', f'.u'' + f''.u'^2}.
inline HyperDual chain(const HyperDual& u, double f, double fp, double fpp) {
  return {f, fp * u.d1, fp * u.d2 + fpp * u.d1 * u.d1};
}

inline HyperDual exp(const HyperDual& u) {
  const double e = std::exp(u.v);
  return chain(u, e, e, e);
}
inline HyperDual sin(const HyperDual& u) {
  const double s = std::sin(u.v), c = std::cos(u.v);
  return chain(u, s, c, -s);
}
inline HyperDual cos(const HyperDual& u) {
  const double s = std::sin(u.v), c = std::cos(u.v);
  return chain(u, c, -s, -c);
}
inline HyperDual tanh(const HyperDual& u) {
  const double t = std::tanh(u.v);
  const double sech2 = 1.0 - t * t;
  return chain(u, t, sech2, -2.0 * t * sech2);
}
inline HyperDual sigmoid(const HyperDual& u) {
  const double s = 1.0 / (1.0 + std::exp(-u.v));
  const double sp = s * (1.0 - s);
  return chain(u, s, sp, sp * (1.0 - 2.0 * s));
}
inline HyperDual square(const HyperDual& u) {
  return chain(u, u.v * u.v, 2.0 * u.v, 2.0);
}
inline HyperDual relu(const HyperDual& u) {
  return u.v > 0 ? u : HyperDual{0.0, 0.0, 0.0};
}
inline HyperDual max(const HyperDual& a, const HyperDual& b) {
  return a.v >= b.v ? a : b;
}

// Plain-double shims so numeric kernels can be written once and instantiated
// with either scalar type.
inline double chain(double, double f, double, double) { return f; }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double square(double x) { return x * x; }
inline double relu(double x) { return x > 0 ? x : 0.0; }

struct HyperDualResult {
  double value;
  double first;
  double second;
};

// Exact value and first/second derivative of f along input axis k.
template <class F>
HyperDualResult hyperdual_d2(F&& f, std::span<const double> x, std::size_t k) {
  std::vector<HyperDual> hx(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) hx[i] = HyperDual(x[i]);
  hx[k] = HyperDual::seed(x[k]);
  HyperDual out = f(std::span<const HyperDual>(hx));
  return {out.v, out.d1, out.d2};
}

}  // namespace gmnmlab
