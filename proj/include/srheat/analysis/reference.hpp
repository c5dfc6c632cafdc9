#pragma once

#include <algorithm>
#include <vector>

#include "srheat/heat/eigen.hpp"
#include "srheat/heat/grid.hpp"
#include "srheat/heat/problem.hpp"
#include "srheat/stepper/scheme.hpp"
#include "srheat/stepper/stepper.hpp"

namespace srheat {

/// States of an exact-arithmetic trajectory at selected steps.
struct Trajectory {
  double dt = 0.0;
  long steps = 0;
  std::vector<Snapshot> snapshots;
  std::vector<double> final_state;

  const std::vector<double>* at(long n) const {
    for (const auto& s : snapshots)
      if (s.n == n) return &s.U;
    return n == steps ? &final_state : nullptr;
  }
};

inline Trajectory to_trajectory(const RunResult& r) {
  return {r.config.dt, r.steps, r.snapshots, r.final_state};
}

/// The same discretization advanced in binary64 without emulated rounding
/// and with the exact forcing.
inline Trajectory reference_run(const Problem& problem, const Grid& grid, const RKScheme& scheme,
                                const StepConfig& cfg, long steps, std::vector<long> probes = {}) {
  StepConfig exact = cfg;
  exact.mode = Rounding::carrier;
  exact.form = Form::carrier;
  RunOptions opt;
  opt.steps = steps;
  opt.probes = std::move(probes);
  opt.fast_forward = false;
  return to_trajectory(run(Stepper(problem, grid, scheme, exact), opt));
}

/// Advances every eigenmode independently:
///   a_k^{n+1} = S(s_k) a_k^n + dt S~(s_k) F_k,  s_k = -dt lambda_k,
/// with F the forcing including the boundary data, then synthesizes.
inline Trajectory spectral_reference(const Problem& problem, const Grid& grid,
                                     const RKScheme& scheme, double dt, long steps,
                                     std::vector<long> probes = {}) {
  const SineBasis basis(grid);
  auto a = basis.analyze(sample(problem.u0, grid));
  const auto F = basis.analyze(forcing_with_boundary(problem, grid));
  std::vector<double> S(a.size()), St(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double z = -dt * basis.lambda(k);
    S[k] = scheme.S(z);
    St[k] = dt * scheme.S_tilde(z) * F[k];
  }
  std::sort(probes.begin(), probes.end());
  Trajectory tr;
  tr.dt = dt;
  tr.steps = steps;
  std::size_t p = 0;
  for (long n = 0;; ++n) {
    while (p < probes.size() && probes[p] == n) {
      tr.snapshots.push_back({n, basis.synthesize(a)});
      ++p;
    }
    while (p < probes.size() && probes[p] < n) ++p;
    if (n == steps) break;
    for (std::size_t k = 0; k < a.size(); ++k) a[k] = S[k] * a[k] + St[k];
  }
  tr.final_state = basis.synthesize(a);
  return tr;
}

/// The fixed point of the discretization: A U = F solved in the eigenbasis.
inline std::vector<double> discrete_steady_state(const Problem& problem, const Grid& grid) {
  const SineBasis basis(grid);
  auto a = basis.analyze(forcing_with_boundary(problem, grid));
  for (std::size_t k = 0; k < a.size(); ++k) a[k] /= basis.lambda(k);
  return basis.synthesize(a);
}

}  // namespace srheat
