#pragma once

#include <array>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "srheat/heat/grid.hpp"
#include "srheat/softfloat/rounding.hpp"

namespace srheat {

/// How the second difference along each direction is formed.
///   two_diff: (U+ - U) - (U - U-)
///   naive:    (U+ - 2U) + U-
enum class MatvecKind { two_diff, naive };

inline const char* to_string(MatvecKind kind) {
  return kind == MatvecKind::two_diff ? "two_diff" : "naive";
}

inline MatvecKind parse_matvec(std::string_view text) {
  if (text == "two_diff" || text == "refined") return MatvecKind::two_diff;
  if (text == "naive") return MatvecKind::naive;
  throw std::invalid_argument("unknown matvec '" + std::string(text) + "'");
}

/// Unscaled discrete Laplacian h^2 (Lap_h U) at every interior node, with the
/// constant `boundary` value substituted for neighbours on the boundary.
///
/// Every subtraction and every partial sum over directions (j = 1..d, left to
/// right) is one rounded operation of `arith`. Scaling by h^-2 is left to
/// the caller.
inline void apply_stencil(std::span<const double> U, const Grid& grid, double boundary,
                          MatvecKind kind, Arithmetic& arith, std::span<double> out) {
  if (U.size() != grid.size() || out.size() != grid.size())
    throw std::invalid_argument("stencil operand does not match grid");
  const int d = grid.d();
  const int last = grid.n1();
  std::array<int, 3> idx{1, 1, 1};
  for (std::size_t i = 0; i < U.size(); ++i) {
    const double c = U[i];
    double acc = 0.0;
    for (int j = 0; j < d; ++j) {
      const std::size_t s = grid.stride(j);
      const double plus = idx[j] == last ? boundary : U[i + s];
      const double minus = idx[j] == 1 ? boundary : U[i - s];
      double term;
      if (kind == MatvecKind::two_diff) {
        term = arith.sub(arith.sub(plus, c), arith.sub(c, minus));
      } else {
        term = arith.add(arith.sub(plus, arith.scale(c, 2.0)), minus);
      }
      acc = j == 0 ? term : arith.add(acc, term);
    }
    out[i] = acc;
    for (int j = 0; j < d; ++j) {
      if (++idx[j] <= last) break;
      idx[j] = 1;
    }
  }
}

inline std::vector<double> apply_stencil(std::span<const double> U, const Grid& grid,
                                         double boundary, MatvecKind kind, Arithmetic& arith) {
  std::vector<double> out(U.size());
  apply_stencil(U, grid, boundary, kind, arith, out);
  return out;
}

namespace detail {
inline std::pair<FieldVector, std::vector<RoundingEvent>> laplacian(const FieldVector& U,
                                                                    const Grid& grid,
                                                                    double boundary,
                                                                    MatvecKind kind,
                                                                    Rounding mode,
                                                                    RngStream* rng) {
  std::vector<RoundingEvent> events;
  Arithmetic arith(U.format, mode, rng);
  arith.record_events(&events);
  FieldVector out(U.format, apply_stencil(U.values, grid, boundary, kind, arith));
  return {std::move(out), std::move(events)};
}
}  // namespace detail

/// Two first differences per direction, each rounded, then differenced.
inline std::pair<FieldVector, std::vector<RoundingEvent>> laplacian_two_diff(
    const FieldVector& U, const Grid& grid, double boundary, Rounding mode,
    RngStream* rng = nullptr) {
  return detail::laplacian(U, grid, boundary, MatvecKind::two_diff, mode, rng);
}

/// Direct second difference U+ - 2U + U- per direction.
inline std::pair<FieldVector, std::vector<RoundingEvent>> laplacian_naive(
    const FieldVector& U, const Grid& grid, double boundary, Rounding mode,
    RngStream* rng = nullptr) {
  return detail::laplacian(U, grid, boundary, MatvecKind::naive, mode, rng);
}

/// Carrier product A v for the homogeneous Dirichlet matrix A (h^-2 included).
inline std::vector<double> apply_A(std::span<const double> v, const Grid& grid) {
  Arithmetic exact;
  auto out = apply_stencil(v, grid, 0.0, MatvecKind::two_diff, exact);
  const double scale = -static_cast<double>(grid.K()) * grid.K();
  for (double& x : out) x *= scale;
  return out;
}

}  // namespace srheat
