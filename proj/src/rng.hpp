#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "error.hpp"
#include "tensor.hpp"

namespace gmnmlab {

// splitmix64: a 64-bit counter-based generator. Identical seeds give
// identical sequences on every platform, which is what run reproducibility
// hangs on. No libc++ distribution objects anywhere near this.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) {
    if (!(lo < hi)) throw Error("rng_uniform requires lo < hi");
    return lo + (hi - lo) * uniform();
  }

  Tensor uniform_tensor(std::vector<std::size_t> shape, double lo, double hi) {
    if (!(lo < hi)) throw Error("rng_uniform requires lo < hi");
    Tensor t(std::move(shape));
    for (double& x : t.span()) x = lo + (hi - lo) * uniform();
    return t;
  }

  // Unbiased-enough index draw via 128-bit multiply; deterministic.
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // First k entries of a random permutation of 0..n-1.
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t k) {
    if (k > n) throw Error("sample_without_replacement: k > n");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t j = i + index(n - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
  }

 private:
  std::uint64_t state_;
};

}  // namespace gmnmlab
