#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "srheat/softfloat/format.hpp"

namespace srheat {

/// Tensor-product mesh on [0,1]^d with K intervals per direction. Only the
/// (K-1)^d interior nodes carry unknowns; they are stored lexicographically
/// with the first direction fastest.
class Grid {
 public:
  Grid(int d, int K) : d_(d), K_(K) {
    if (d < 1 || d > 3) throw std::invalid_argument("grid dimension must be 1, 2 or 3");
    if (K < 2) throw std::invalid_argument("grid needs K >= 2 intervals");
    std::size_t n = 1;
    for (int j = 0; j < d_; ++j) {
      stride_[j] = n;
      n *= static_cast<std::size_t>(K_ - 1);
    }
    size_ = n;
  }

  int d() const { return d_; }
  int K() const { return K_; }
  double h() const { return 1.0 / K_; }
  std::size_t size() const { return size_; }
  /// Interior points per direction.
  int n1() const { return K_ - 1; }
  std::size_t stride(int j) const { return stride_[j]; }
  bool power_of_two() const { return (K_ & (K_ - 1)) == 0; }

  /// 1-based multi-index of a flat position.
  std::array<int, 3> multi_index(std::size_t flat) const {
    std::array<int, 3> idx{0, 0, 0};
    for (int j = 0; j < d_; ++j) {
      idx[j] = static_cast<int>(flat % static_cast<std::size_t>(n1())) + 1;
      flat /= static_cast<std::size_t>(n1());
    }
    return idx;
  }

  std::size_t flat(const std::array<int, 3>& idx) const {
    std::size_t f = 0;
    for (int j = 0; j < d_; ++j) f += static_cast<std::size_t>(idx[j] - 1) * stride_[j];
    return f;
  }

  /// Node coordinates x_i = i h.
  std::array<double, 3> coords(std::size_t flat_index) const {
    const auto idx = multi_index(flat_index);
    std::array<double, 3> x{0.5, 0.5, 0.5};
    for (int j = 0; j < d_; ++j) x[j] = idx[j] * h();
    return x;
  }

  /// Number of stencil neighbours of a node that lie on the boundary.
  int boundary_neighbors(std::size_t flat_index) const {
    const auto idx = multi_index(flat_index);
    int nb = 0;
    for (int j = 0; j < d_; ++j) nb += (idx[j] == 1) + (idx[j] == n1());
    return nb;
  }

  friend bool operator==(const Grid& a, const Grid& b) { return a.d_ == b.d_ && a.K_ == b.K_; }

 private:
  int d_;
  int K_;
  std::array<std::size_t, 3> stride_{1, 1, 1};
  std::size_t size_ = 0;
};

inline Grid make_grid(int d, int K) { return Grid(d, K); }

/// Interior nodal values tagged with the format they are representable in.
struct FieldVector {
  FloatFormat format = FloatFormat::fp64();
  std::vector<double> values;

  FieldVector() = default;
  FieldVector(const Grid& grid, FloatFormat fmt, double fill = 0.0)
      : format(fmt), values(grid.size(), fill) {}
  FieldVector(FloatFormat fmt, std::vector<double> v) : format(fmt), values(std::move(v)) {}

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  std::span<const double> span() const { return values; }
};

struct Norms {
  double linf = 0.0;
  double l2 = 0.0;  // discrete L2: K^{-d/2} ||.||_2
};

/// Carrier-precision infinity and discrete L2 norms.
inline Norms norms(std::span<const double> v, const Grid& grid) {
  if (v.size() != grid.size()) throw std::invalid_argument("vector does not match grid");
  double linf = 0.0, sum = 0.0;
  for (double x : v) {
    linf = std::max(linf, std::fabs(x));
    sum += x * x;
  }
  return {linf, std::sqrt(sum) * std::pow(static_cast<double>(grid.K()), -0.5 * grid.d())};
}

inline double norm_inf(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

inline double norm_l2(std::span<const double> v, const Grid& grid) { return norms(v, grid).l2; }

}  // namespace srheat
