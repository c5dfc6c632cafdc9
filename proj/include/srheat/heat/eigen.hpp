#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "srheat/heat/grid.hpp"

namespace srheat {

using MultiIndex = std::array<int, 3>;

/// Eigenpair of the Dirichlet finite-difference matrix A.
/// The eigenvector is scaled so that ||v||_2^2 = (K/2)^d.
struct EigenPair {
  MultiIndex k{1, 1, 1};
  double lambda = 0.0;
  FieldVector v;
};

inline void check_mode(const MultiIndex& k, const Grid& grid) {
  for (int j = 0; j < grid.d(); ++j)
    if (k[j] < 1 || k[j] > grid.n1())
      throw std::out_of_range("mode index outside 1..K-1");
}

/// lambda_k = 4 K^2 sum_j sin^2(pi k_j / 2K).
inline double eigenvalue(const MultiIndex& k, const Grid& grid) {
  check_mode(k, grid);
  const double K = grid.K();
  double sum = 0.0;
  for (int j = 0; j < grid.d(); ++j) {
    const double s = std::sin(std::numbers::pi * k[j] / (2.0 * K));
    sum += s * s;
  }
  return 4.0 * K * K * sum;
}

inline EigenPair eigenpair(const MultiIndex& k, const Grid& grid) {
  EigenPair ep;
  ep.k = k;
  ep.lambda = eigenvalue(k, grid);
  ep.v = FieldVector(grid, FloatFormat::fp64());
  const double K = grid.K();
  for (std::size_t f = 0; f < grid.size(); ++f) {
    const auto i = grid.multi_index(f);
    double prod = 1.0;
    for (int j = 0; j < grid.d(); ++j) prod *= std::sin(std::numbers::pi * i[j] * k[j] / K);
    ep.v[f] = prod;
  }
  return ep;
}

/// Separable sine transform over the eigenbasis of A. Modes are stored in the
/// same lexicographic layout as nodes, mode k at the position of node i = k.
class SineBasis {
 public:
  explicit SineBasis(const Grid& grid) : grid_(grid), n_(grid.n1()), table_(n_ * n_) {
    for (int i = 1; i <= n_; ++i)
      for (int k = 1; k <= n_; ++k)
        table_[(i - 1) * n_ + (k - 1)] = std::sin(std::numbers::pi * i * k / grid.K());
    lambda_.resize(grid.size());
    for (std::size_t f = 0; f < grid.size(); ++f) lambda_[f] = eigenvalue(grid.multi_index(f), grid);
  }

  const Grid& grid() const { return grid_; }
  /// Eigenvalue of the mode stored at flat position f.
  double lambda(std::size_t f) const { return lambda_[f]; }
  std::span<const double> lambdas() const { return lambda_; }

  /// Coefficients a_k with U = sum_k a_k v_k, i.e. a_k = (2/K)^d (U, v_k).
  std::vector<double> analyze(std::span<const double> U) const {
    auto a = transform(U);
    const double scale = std::pow(2.0 / grid_.K(), grid_.d());
    for (double& x : a) x *= scale;
    return a;
  }

  /// U = sum_k a_k v_k.
  std::vector<double> synthesize(std::span<const double> a) const { return transform(a); }

 private:
  std::vector<double> transform(std::span<const double> in) const {
    if (in.size() != grid_.size()) throw std::invalid_argument("vector does not match grid");
    std::vector<double> cur(in.begin(), in.end()), next(in.size());
    for (int j = 0; j < grid_.d(); ++j) {
      const std::size_t s = grid_.stride(j);
      for (std::size_t base = 0; base < cur.size(); ++base) {
        // only visit line starts along direction j
        if ((base / s) % static_cast<std::size_t>(n_) != 0) continue;
        for (int k = 0; k < n_; ++k) {
          double acc = 0.0;
          for (int i = 0; i < n_; ++i) acc += table_[i * n_ + k] * cur[base + i * s];
          next[base + k * s] = acc;
        }
      }
      cur.swap(next);
    }
    return cur;
  }

  Grid grid_;
  int n_;
  std::vector<double> table_;
  std::vector<double> lambda_;
};

}  // namespace srheat
