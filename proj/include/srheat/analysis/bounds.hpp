#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "srheat/analysis/errors.hpp"
#include "srheat/analysis/montecarlo.hpp"
#include "srheat/heat/eigen.hpp"
#include "srheat/heat/grid.hpp"
#include "srheat/softfloat/format.hpp"
#include "srheat/softfloat/rounding.hpp"
#include "srheat/stepper/scheme.hpp"

namespace srheat {

/// Lower bound constant for the scaled eigenvalues: lambda_k >= c ||k||^2.
inline constexpr double kEigenLowerConstant =
    std::numbers::pi * std::numbers::pi * (1.0 - std::numbers::pi * std::numbers::pi / 12.0);

/// Upper bound on sum_{k in [1, K]^d} ||k||^-2.
inline double inverse_square_bound(int d, int K) {
  const double pi = std::numbers::pi;
  switch (d) {
    case 1: return pi * pi / 6.0;
    case 2: return 0.5 * pi * std::log(std::sqrt(2.0) * K) + 0.5;
    case 3: return 0.5 * pi * std::sqrt(3.0) * K - 0.5 * pi + 1.0 / 3.0;
  }
  throw std::invalid_argument("dimension must be 1, 2 or 3");
}

/// Upper bound on sum_{k in [1, inf)^d} ||k||^-4.
inline double inverse_fourth_bound(int d) {
  const double pi = std::numbers::pi;
  switch (d) {
    case 1: return std::pow(pi, 4) / 90.0;
    case 2: return 0.25 * pi + 0.25;
    case 3: return 0.5 * pi + 1.0 / 9.0;
  }
  throw std::invalid_argument("dimension must be 1, 2 or 3");
}

/// sum_{k in [1, K]^d} ||k||^-power by direct summation.
inline double lattice_sum(int d, int K, int power) {
  if (d < 1 || d > 3 || K < 1) throw std::invalid_argument("invalid lattice sum");
  const int K2 = d >= 2 ? K : 1, K3 = d >= 3 ? K : 1;
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(K) * K2 * K3);
  for (int k = 1; k <= K3; ++k)
    for (int j = 1; j <= K2; ++j)
      for (int i = 1; i <= K; ++i) {
        const double r2 = double(i) * i + (d >= 2 ? double(j) * j : 0.0) + (d >= 3 ? double(k) * k : 0.0);
        terms.push_back(std::pow(r2, -0.5 * power));
      }
  // smallest terms first
  double s = 0.0;
  for (auto it = terms.rbegin(); it != terms.rend(); ++it) s += *it;
  return s;
}

/// Split of the stability interval used by the series bounds:
/// 0 <= S(z) <= 1 + z/2 on (-s0, 0) and 1 - |S| >= alpha0 on [-4 d lambda, -s0].
struct StabilitySplit {
  double s0 = 0.0;
  double alpha0 = 1.0;
};

inline StabilitySplit stability_split(const RKScheme& sc, int d, double lambda, int samples = 4096) {
  const double width = 4.0 * d * lambda;
  auto good = [&](double z) {
    const double s = sc.S(z);
    return s >= 0.0 && s <= 1.0 + 0.5 * z;
  };
  StabilitySplit r;
  r.s0 = width;
  for (int i = 1; i <= samples; ++i) {
    const double z = -width * i / samples;
    if (good(z)) continue;
    double a = -width * (i - 1) / samples, b = z;  // good at a, bad at b
    for (int it = 0; it < 60; ++it) {
      const double m = 0.5 * (a + b);
      (good(m) ? a : b) = m;
    }
    r.s0 = -a;
    break;
  }
  if (!(r.s0 > 0.0)) throw std::domain_error("stability function does not start like 1 + z");
  if (r.s0 >= width) {
    r.alpha0 = 1.0;
    return r;
  }
  double alpha = 1.0 - std::fabs(sc.S(-r.s0));
  for (int i = 0; i <= samples; ++i) {
    const double z = -r.s0 - (width - r.s0) * i / samples;
    alpha = std::min(alpha, 1.0 - std::fabs(sc.S(z)));
  }
  if (!(alpha > 0.0)) throw std::domain_error("stability interval touches |S| = 1");
  r.alpha0 = alpha;
  return r;
}

/// Exact eigen-sums over all (K-1)^d modes, s_k = -dt lambda_k.
struct EigenSums {
  double inv_one_minus_abs = 0.0;     // sum 1/(1-|S|)
  double inv_one_minus_abs_sq = 0.0;  // sum 1/(1-|S|)^2
  double weighted_ones = 0.0;         // K^-d sum (1, v_k)/(1-|S|)
  double inv_one_minus_sq = 0.0;      // sum 1/(1-S^2)
};

struct SeriesBounds {
  StabilitySplit split;
  /// phi_d(dt) bounding sum 1/(1-|S|).
  double phi = 0.0;
  /// C_bar^2 dt^-2 bounding sum 1/(1-|S|)^2.
  double c_bar_sq = 0.0;
  /// C_tilde dt^-1 bounding K^-d sum (1, v_k)/(1-|S|).
  double c_tilde = 0.0;
  EigenSums sums;
};

/// Evaluates the exact eigen-sums and the closed-form bounds that dominate
/// them. The bounds follow the splitting argument: modes with |s_k| <= s0
/// contribute at most 2/(-s_k) <= 2/(c dt ||k||^2), the rest at most 1/alpha0.
inline SeriesBounds phi_bound_and_sums(const RKScheme& sc, int d, double dt, double lambda, int K) {
  const Grid grid(d, K);
  const double width = 4.0 * d * lambda;
  for (int i = 0; i <= 4096; ++i) {
    const double z = -width * i / 4096.0;
    if (!(sc.denominator(z) > 0.0)) throw std::domain_error("stability function has a pole on the negative axis");
    if (i > 0 && !(std::fabs(sc.S(z)) < 1.0)) throw std::domain_error("stability violated on [-4 d lambda, 0)");
  }
  SeriesBounds b;
  b.split = stability_split(sc, d, lambda);

  // (1, v_k) factorizes into 1D sums sum_i sin(pi i k / K)
  std::vector<double> ones1d(K - 1);
  for (int k = 1; k < K; ++k) {
    double s = 0.0;
    for (int i = 1; i < K; ++i) s += std::sin(std::numbers::pi * i * k / K);
    ones1d[k - 1] = s;
  }
  std::vector<double> t1, t2, t3, t4;
  for (std::size_t f = 0; f < grid.size(); ++f) {
    const auto k = grid.multi_index(f);
    const double S = sc.S(-dt * eigenvalue(k, grid));
    const double a = 1.0 - std::fabs(S);
    if (!(a > 0.0)) throw std::domain_error("mode with |S| >= 1");
    double ones = 1.0;
    for (int j = 0; j < d; ++j) ones *= ones1d[k[j] - 1];
    t1.push_back(1.0 / a);
    t2.push_back(1.0 / (a * a));
    t3.push_back(ones / a);
    t4.push_back(1.0 / (1.0 - S * S));
  }
  b.sums.inv_one_minus_abs = pairwise_sum(t1);
  b.sums.inv_one_minus_abs_sq = pairwise_sum(t2);
  b.sums.weighted_ones = pairwise_sum(t3) / std::pow(double(K), d);
  b.sums.inv_one_minus_sq = pairwise_sum(t4);

  const double c = kEigenLowerConstant;
  const double modes = std::pow(double(K - 1), d);
  const double ct = inverse_fourth_bound(d);
  b.phi = 2.0 / (c * dt) * inverse_square_bound(d, K - 1) + modes / b.split.alpha0;
  b.c_bar_sq = 4.0 / (c * c * dt * dt) * ct + modes / (b.split.alpha0 * b.split.alpha0);
  b.c_tilde = 2.0 * std::pow(2.0, -0.5 * d) * std::sqrt(ct) / (c * dt) +
              std::pow(std::numbers::pi, -d) * std::pow(std::log(double(K - 1)) + 2.0, d) /
                  b.split.alpha0;
  return b;
}

/// True when S(-dt A) is known to have non-negative entries: forward
/// Euler-like N(z) = 1 + z with 2 d lambda <= 1, or implicit schemes with
/// N = 1 (inverse of an M-matrix).
inline bool propagator_nonnegative(const RKScheme& sc, int d, double lambda) {
  const Polynomial& N = sc.numerator;
  if (!sc.implicit) return N.degree() == 1 && N.coeff(0) == 1.0 && N.coeff(1) == 1.0 && 2.0 * d * lambda <= 1.0;
  return N.degree() == 0;
}

struct BoundParams {
  /// eps = M * u_bar, u_bar = u (round to nearest) or 2u (stochastic).
  double eps = 0.0;
  double M = 0.0;
  int d = 1;
  int K = 2;
  double lambda = 0.0;
  double dt = 0.0;
  SeriesBounds series;
  /// Use the maximum-principle bound for the round-to-nearest inf-norm.
  bool nonnegative_propagator = false;
};

inline double unit_roundoff_bar(Rounding mode, const FloatFormat& fmt) {
  return mode == Rounding::stochastic ? 2.0 * fmt.unit() : fmt.unit();
}

inline BoundParams make_bound_params(Rounding mode, const FloatFormat& fmt, double M,
                                     const RKScheme& sc, int d, int K, double lambda, double dt) {
  BoundParams p;
  p.M = M;
  p.eps = mode == Rounding::carrier ? 0.0 : M * unit_roundoff_bar(mode, fmt);
  p.d = d;
  p.K = K;
  p.lambda = lambda;
  p.dt = dt;
  p.series = phi_bound_and_sums(sc, d, dt, lambda, K);
  p.nonnegative_propagator = propagator_nonnegative(sc, d, lambda);
  return p;
}

/// Closed-form global error bounds. Round to nearest bounds ||E^N|| itself;
/// stochastic rounding bounds E[||E^N||_inf] and E[||E^N||_L2^2]^{1/2}.
inline double predicted_global_bound(Rounding mode, NormKind norm, const BoundParams& p) {
  if (p.eps < 0.0) throw std::invalid_argument("eps must be non-negative");
  const double d = p.d;
  const auto& s = p.series;
  if (mode == Rounding::nearest) {
    if (norm == NormKind::inf) {
      const double general = std::pow(2.0, d) * p.eps * s.phi;
      if (!p.nonnegative_propagator) return general;
      return std::min(general, p.eps * std::pow(2.0, d) * s.c_tilde);
    }
    return std::pow(2.0, 0.5 * d) * std::sqrt(s.c_bar_sq) * p.eps;
  }
  if (mode == Rounding::stochastic) {
    const double base = p.eps * std::pow(p.lambda, -0.25 * d) * std::pow(p.dt, 0.25 * d) * std::sqrt(s.phi);
    if (norm == NormKind::l2) return base;
    return std::pow(2.0, 2.0 + 0.5 * d) * base *
           std::sqrt(0.5 * d * std::log(p.lambda / p.dt) + std::log(2.0));
  }
  throw std::invalid_argument("bounds are defined for round-to-nearest and stochastic rounding");
}

}  // namespace srheat
