#include "linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gmnmlab {

namespace {

void require_square(const Tensor& a, const char* who) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1))
    throw ShapeError(std::string(who) + ": square matrix required");
}

}  // namespace

bool is_symmetric(const Tensor& a, double tol) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1)) return false;
  const std::size_t d = a.dim(0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j)
      if (std::abs(a.at(i, j) - a.at(j, i)) > tol) return false;
  return true;
}

EigenSym eigh(const Tensor& a, double tol) {
  require_square(a, "eigh");
  const std::size_t d = a.dim(0);
  Tensor m = a;
  Tensor v({d, d});
  for (std::size_t i = 0; i < d; ++i) v.at(i, i) = 1.0;

  double scale = 0.0;
  for (double x : m.span()) scale = std::max(scale, std::abs(x));
  if (scale == 0.0) scale = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = p + 1; q < d; ++q) off += std::abs(m.at(p, q));
    if (off <= tol * scale) break;

    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        const double apq = m.at(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double theta = (m.at(q, q) - m.at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < d; ++k) {
          const double mkp = m.at(k, p), mkq = m.at(k, q);
          m.at(k, p) = c * mkp - s * mkq;
          m.at(k, q) = s * mkp + c * mkq;
        }
        for (std::size_t k = 0; k < d; ++k) {
          const double mpk = m.at(p, k), mqk = m.at(q, k);
          m.at(p, k) = c * mpk - s * mqk;
          m.at(q, k) = s * mpk + c * mqk;
        }
        for (std::size_t k = 0; k < d; ++k) {
          const double vkp = v.at(k, p), vkq = v.at(k, q);
          v.at(k, p) = c * vkp - s * vkq;
          v.at(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return m.at(i, i) < m.at(j, j);
  });

  EigenSym out;
  out.values.resize(d);
  out.vectors = Tensor({d, d});
  for (std::size_t j = 0; j < d; ++j) {
    out.values[j] = m.at(order[j], order[j]);
    for (std::size_t i = 0; i < d; ++i)
      out.vectors.at(i, j) = v.at(i, order[j]);
  }
  return out;
}

namespace {

// LU factorization in place; returns permutation sign, throws if singular.
double lu_decompose(Tensor& m, std::vector<std::size_t>& perm) {
  const std::size_t d = m.dim(0);
  perm.resize(d);
  std::iota(perm.begin(), perm.end(), 0);
  double sign = 1.0;
  for (std::size_t col = 0; col < d; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < d; ++r)
      if (std::abs(m.at(r, col)) > std::abs(m.at(piv, col))) piv = r;
    if (m.at(piv, col) == 0.0) throw DataError("singular matrix");
    if (piv != col) {
      for (std::size_t c = 0; c < d; ++c)
        std::swap(m.at(piv, c), m.at(col, c));
      std::swap(perm[piv], perm[col]);
      sign = -sign;
    }
    for (std::size_t r = col + 1; r < d; ++r) {
      const double f = m.at(r, col) / m.at(col, col);
      m.at(r, col) = f;
      for (std::size_t c = col + 1; c < d; ++c)
        m.at(r, c) -= f * m.at(col, c);
    }
  }
  return sign;
}

}  // namespace

double det(const Tensor& a) {
  require_square(a, "det");
  Tensor m = a;
  std::vector<std::size_t> perm;
  double sign;
  try {
    sign = lu_decompose(m, perm);
  } catch (const DataError&) {
    return 0.0;
  }
  double d = sign;
  for (std::size_t i = 0; i < m.dim(0); ++i) d *= m.at(i, i);
  return d;
}

Tensor inverse(const Tensor& a) {
  require_square(a, "inverse");
  const std::size_t d = a.dim(0);
  Tensor m = a;
  std::vector<std::size_t> perm;
  lu_decompose(m, perm);

  Tensor inv({d, d});
  std::vector<double> col(d), y(d);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < d; ++i) col[i] = (perm[i] == j) ? 1.0 : 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      y[i] = col[i];
      for (std::size_t k = 0; k < i; ++k) y[i] -= m.at(i, k) * y[k];
    }
    for (std::size_t ii = d; ii-- > 0;) {
      double x = y[ii];
      for (std::size_t k = ii + 1; k < d; ++k) x -= m.at(ii, k) * inv.at(k, j);
      inv.at(ii, j) = x / m.at(ii, ii);
    }
  }
  throw_if_not_finite(inv, "inverse");
  return inv;
}

}  // namespace gmnmlab
