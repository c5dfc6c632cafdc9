#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "srheat/heat/grid.hpp"
#include "srheat/heat/laplacian.hpp"
#include "srheat/softfloat/rounding.hpp"

namespace srheat {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tridiagonal solve by forward elimination and back substitution. Row i reads
/// sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]; sub[0] and sup[n-1]
/// are ignored. Every operation goes through `arith`.
inline std::vector<double> thomas_solve(std::span<const double> sub, std::span<const double> diag,
                                        std::span<const double> sup,
                                        std::span<const double> rhs, Arithmetic& arith) {
  const std::size_t n = rhs.size();
  if (n == 0) return {};
  if (sub.size() != n || diag.size() != n || sup.size() != n)
    throw std::invalid_argument("tridiagonal coefficient arrays must match the right-hand side");
  std::vector<double> cp(n), dp(n);
  if (diag[0] == 0.0) throw SolverError("zero pivot in row 0");
  cp[0] = n > 1 ? arith.div(sup[0], diag[0]) : 0.0;
  dp[0] = arith.div(rhs[0], diag[0]);
  for (std::size_t i = 1; i < n; ++i) {
    const double m = arith.sub(diag[i], arith.mul(sub[i], cp[i - 1]));
    if (m == 0.0) throw SolverError("zero pivot in row " + std::to_string(i));
    if (!std::isfinite(m)) throw SolverError("overflow during elimination");
    cp[i] = i + 1 < n ? arith.div(sup[i], m) : 0.0;
    dp[i] = arith.div(arith.sub(rhs[i], arith.mul(sub[i], dp[i - 1])), m);
  }
  std::vector<double> x(n);
  x[n - 1] = dp[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = arith.sub(dp[i], arith.mul(cp[i], x[i + 1]));
  for (double v : x)
    if (!std::isfinite(v)) throw SolverError("overflow during back substitution");
  return x;
}

inline FieldVector thomas_solve(std::span<const double> sub, std::span<const double> diag,
                                std::span<const double> sup, const FieldVector& rhs,
                                Rounding mode, RngStream* rng = nullptr) {
  Arithmetic arith(rhs.format, mode, rng);
  return FieldVector(rhs.format, thomas_solve(sub, diag, sup, rhs.values, arith));
}

/// The matrix I - mu * L0 on a grid, with L0 the unscaled homogeneous
/// Dirichlet stencil. With mu = c * Delta t / h^2 this is I + c Delta t A.
struct ShiftedLaplacian {
  Grid grid;
  double mu;
};

/// y = x - mu L0 x, every operation rounded.
inline std::vector<double> apply_operator(const ShiftedLaplacian& op, std::span<const double> x,
                                          Arithmetic& arith, MatvecKind kind = MatvecKind::two_diff) {
  auto y = apply_stencil(x, op.grid, 0.0, kind, arith);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = arith.sub(x[i], arith.scale(y[i], op.mu));
  return y;
}

/// 1D solve of (I - mu L0) x = rhs by the Thomas algorithm.
inline std::vector<double> thomas_solve(const ShiftedLaplacian& op, std::span<const double> rhs,
                                        Arithmetic& arith) {
  if (op.grid.d() != 1) throw std::invalid_argument("Thomas solver needs a 1D grid");
  const std::size_t n = rhs.size();
  std::vector<double> off(n, -op.mu), diag(n, 1.0 + 2.0 * op.mu);
  return thomas_solve(off, diag, off, rhs, arith);
}

struct MultigridOptions {
  int pre_smooth = 2;
  int post_smooth = 2;
  /// A cycle that does not reduce the residual 2-norm below this factor ends the iteration.
  double stall_factor = 0.9;
  int max_cycles = 50;
  /// Jacobi weight; 0 selects 2/3, 4/5, 6/7 for d = 1, 2, 3.
  double omega = 0.0;
};

struct MultigridResult {
  std::vector<double> x;
  int cycles = 0;
  bool converged = true;
  /// ||rhs - (I - mu L0) x||_2 / ||rhs||_2 evaluated in the carrier.
  double relative_residual = 0.0;
  std::vector<double> residual_history;
};

namespace detail {

using Dims = std::array<int, 3>;

inline std::size_t dims_size(const Dims& n, int d) {
  std::size_t s = 1;
  for (int j = 0; j < d; ++j) s *= static_cast<std::size_t>(n[j]);
  return s;
}

/// Visits every entry of an output array of shape `out`, passing its flat
/// index and the flat index in the input array (shape `in`) of the same
/// multi-index with direction j replaced by the caller-chosen coordinate.
template <class Fn>
void for_each_line_entry(const Dims& in, const Dims& out, int d, int j, Fn&& fn) {
  std::array<std::size_t, 3> in_stride{1, 1, 1};
  for (int l = 1; l < d; ++l) in_stride[l] = in_stride[l - 1] * in[l - 1];
  Dims idx{0, 0, 0};
  const std::size_t total = dims_size(out, d);
  for (std::size_t f = 0; f < total; ++f) {
    std::size_t base = 0;
    for (int l = 0; l < d; ++l)
      if (l != j) base += idx[l] * in_stride[l];
    fn(f, base, in_stride[j], idx[j]);
    for (int l = 0; l < d; ++l) {
      if (++idx[l] < out[l]) break;
      idx[l] = 0;
    }
  }
}

/// Full weighting (1/4, 1/2, 1/4) along direction j.
inline std::vector<double> restrict_dir(const std::vector<double>& in, Dims& dims, int d, int j,
                                        Arithmetic& arith) {
  Dims out = dims;
  out[j] = (dims[j] + 1) / 2 - 1;
  std::vector<double> r(dims_size(out, d));
  for_each_line_entry(dims, out, d, j, [&](std::size_t f, std::size_t base, std::size_t s, int c) {
    const std::size_t mid = base + static_cast<std::size_t>(2 * c + 1) * s;
    const double acc = arith.add(arith.scale(in[mid - s], 0.25), arith.scale(in[mid], 0.5));
    r[f] = arith.add(acc, arith.scale(in[mid + s], 0.25));
  });
  dims = out;
  return r;
}

/// Linear interpolation along direction j with zero boundary values.
inline std::vector<double> prolong_dir(const std::vector<double>& in, Dims& dims, int d, int j,
                                       Arithmetic& arith) {
  Dims out = dims;
  out[j] = 2 * (dims[j] + 1) - 1;
  const int nc = dims[j];
  std::vector<double> p(dims_size(out, d));
  for_each_line_entry(dims, out, d, j, [&](std::size_t f, std::size_t base, std::size_t s, int fi) {
    const int F = fi + 1;
    if (F % 2 == 0) {
      p[f] = in[base + static_cast<std::size_t>(F / 2 - 1) * s];
      return;
    }
    const int left = (F - 1) / 2, right = (F + 1) / 2;
    const double a = left >= 1 ? in[base + static_cast<std::size_t>(left - 1) * s] : 0.0;
    const double b = right <= nc ? in[base + static_cast<std::size_t>(right - 1) * s] : 0.0;
    p[f] = arith.scale(arith.add(a, b), 0.5);
  });
  dims = out;
  return p;
}

inline double carrier_norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline std::vector<double> residual(const ShiftedLaplacian& op, std::span<const double> b,
                                    std::span<const double> x, Arithmetic& arith) {
  auto ax = apply_operator(op, x, arith);
  for (std::size_t i = 0; i < ax.size(); ++i) ax[i] = arith.sub(b[i], ax[i]);
  return ax;
}

inline void jacobi(const ShiftedLaplacian& op, std::span<const double> b, std::vector<double>& x,
                   double omega, int sweeps, Arithmetic& arith) {
  const double weight = omega / (1.0 + 2.0 * op.grid.d() * op.mu);
  for (int s = 0; s < sweeps; ++s) {
    const auto r = residual(op, b, x, arith);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = arith.add(x[i], arith.scale(r[i], weight));
  }
}

inline void v_cycle(const ShiftedLaplacian& op, std::span<const double> b, std::vector<double>& x,
                    const MultigridOptions& opt, double omega, Arithmetic& arith) {
  const int d = op.grid.d();
  if (op.grid.K() == 2) {
    x[0] = arith.div(b[0], 1.0 + 2.0 * d * op.mu);
    return;
  }
  jacobi(op, b, x, omega, opt.pre_smooth, arith);
  auto r = residual(op, b, x, arith);
  Dims dims{op.grid.n1(), op.grid.n1(), op.grid.n1()};
  for (int j = 0; j < d; ++j) r = restrict_dir(r, dims, d, j, arith);
  const ShiftedLaplacian coarse{Grid(d, op.grid.K() / 2), op.mu / 4.0};
  std::vector<double> e(r.size(), 0.0);
  v_cycle(coarse, r, e, opt, omega, arith);
  for (int j = 0; j < d; ++j) e = prolong_dir(e, dims, d, j, arith);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = arith.add(x[i], e[i]);
  jacobi(op, b, x, omega, opt.post_smooth, arith);
}

}  // namespace detail

/// Geometric multigrid for (I - mu L0) x = rhs: V-cycles with weighted Jacobi
/// smoothing, full-weighting restriction, multilinear prolongation and a
/// direct solve on the K = 2 grid. The iteration stops when a cycle fails to
/// reduce the residual by `stall_factor`, or is flagged non-converged at the
/// cycle cap. The best iterate seen is returned.
inline MultigridResult mg_solve(const ShiftedLaplacian& op, std::span<const double> rhs,
                                std::span<const double> guess, Arithmetic& arith,
                                const MultigridOptions& opt = {}) {
  const Grid& g = op.grid;
  if (!g.power_of_two()) throw std::invalid_argument("multigrid needs K a power of two");
  if (rhs.size() != g.size() || guess.size() != g.size())
    throw std::invalid_argument("multigrid operand does not match grid");
  static constexpr double kDefaultOmega[] = {2.0 / 3.0, 4.0 / 5.0, 6.0 / 7.0};
  const double omega = opt.omega > 0.0 ? opt.omega : kDefaultOmega[g.d() - 1];

  MultigridResult res;
  std::vector<double> x(guess.begin(), guess.end());
  double prev = detail::carrier_norm2(detail::residual(op, rhs, x, arith));
  res.residual_history.push_back(prev);
  std::vector<double> best = x;
  double best_norm = prev;
  bool stalled = prev == 0.0;
  while (!stalled && res.cycles < opt.max_cycles) {
    detail::v_cycle(op, rhs, x, opt, omega, arith);
    ++res.cycles;
    for (double v : x)
      if (!std::isfinite(v)) throw SolverError("overflow in multigrid");
    const double now = detail::carrier_norm2(detail::residual(op, rhs, x, arith));
    res.residual_history.push_back(now);
    if (now < best_norm) {
      best = x;
      best_norm = now;
    }
    stalled = now == 0.0 || now > opt.stall_factor * prev;
    prev = now;
  }
  res.converged = stalled;
  res.x = std::move(best);

  Arithmetic exact;
  const double bnorm = detail::carrier_norm2(rhs);
  const double rnorm = detail::carrier_norm2(detail::residual(op, rhs, res.x, exact));
  res.relative_residual = bnorm > 0.0 ? rnorm / bnorm : rnorm;
  return res;
}

inline MultigridResult mg_solve(const ShiftedLaplacian& op, const FieldVector& rhs,
                                const FieldVector& guess, Rounding mode,
                                RngStream* rng = nullptr, const MultigridOptions& opt = {}) {
  Arithmetic arith(rhs.format, mode, rng);
  return mg_solve(op, rhs.values, guess.values, arith, opt);
}

}  // namespace srheat
