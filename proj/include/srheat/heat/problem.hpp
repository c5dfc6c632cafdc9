#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "srheat/heat/grid.hpp"

namespace srheat {

using Point = std::array<double, 3>;
using ScalarField = std::function<double(const Point&)>;

/// Heat equation u_t - Lap u = f on [0,1]^d with constant Dirichlet data G
/// and time-independent forcing.
struct Problem {
  std::string name;
  int d = 1;
  double G = 0.0;
  ScalarField u0;
  ScalarField forcing;
  /// Closed-form steady state, when known.
  ScalarField steady;
};

namespace detail {

/// u = (4^d prod x_j(1-x_j))^2 + G and f = -Lap u, written through the
/// partial products q_j = prod_{l != j} p_l so the boundary needs no division.
struct BumpSolution {
  int d;
  double G;

  double steady(const Point& x) const {
    double P = 1.0;
    for (int j = 0; j < d; ++j) P *= x[j] * (1.0 - x[j]);
    const double c = std::ldexp(1.0, 2 * d);
    return (c * P) * (c * P) + G;
  }

  double forcing(const Point& x) const {
    const double c = std::ldexp(1.0, 2 * d);
    double P = 1.0;
    for (int j = 0; j < d; ++j) P *= x[j] * (1.0 - x[j]);
    double sum = 0.0;
    for (int j = 0; j < d; ++j) {
      double q = 1.0;
      for (int l = 0; l < d; ++l)
        if (l != j) q *= x[l] * (1.0 - x[l]);
      const double slope = 1.0 - 2.0 * x[j];
      sum += q * q * slope * slope - 2.0 * P * q;
    }
    return -2.0 * c * c * sum;
  }
};

}  // namespace detail

/// The manufactured problem with steady state (4^d prod x_j(1-x_j))^2 + G,
/// started from the constant initial condition u0 = G.
inline Problem test_problem(int d, double G) {
  if (d < 1 || d > 3) throw std::invalid_argument("test problem dimension must be 1, 2 or 3");
  detail::BumpSolution sol{d, G};
  Problem p;
  p.name = "heat" + std::to_string(d) + "d";
  p.d = d;
  p.G = G;
  p.u0 = [G](const Point&) { return G; };
  p.forcing = [sol](const Point& x) { return sol.forcing(x); };
  p.steady = [sol](const Point& x) { return sol.steady(x); };
  return p;
}

/// Resolves "heat1d" / "heat2d" / "heat3d".
inline Problem problem_by_name(const std::string& name, double G) {
  if (name == "heat1d") return test_problem(1, G);
  if (name == "heat2d") return test_problem(2, G);
  if (name == "heat3d") return test_problem(3, G);
  throw std::invalid_argument("unknown problem '" + name + "'");
}

/// Samples a field at the interior nodes in the carrier.
inline std::vector<double> sample(const ScalarField& field, const Grid& grid) {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = field(grid.coords(i));
  return v;
}

/// Forcing vector with the Dirichlet data folded in: f_i + G h^-2 (#boundary
/// neighbours). This is the f of the semi-discrete system U' + A U = f.
inline std::vector<double> forcing_with_boundary(const Problem& p, const Grid& grid) {
  auto f = sample(p.forcing, grid);
  const double scale = p.G * grid.K() * grid.K();
  if (scale != 0.0)
    for (std::size_t i = 0; i < f.size(); ++i) f[i] += scale * grid.boundary_neighbors(i);
  return f;
}

}  // namespace srheat
