#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "srheat/analysis/reference.hpp"
#include "srheat/heat/grid.hpp"
#include "srheat/softfloat/rounding.hpp"

namespace srheat {

enum class NormKind { inf, l2 };

inline const char* to_string(NormKind k) { return k == NormKind::inf ? "inf" : "l2"; }

inline NormKind parse_norm(std::string_view text) {
  if (text == "inf" || text == "linf") return NormKind::inf;
  if (text == "l2" || text == "L2") return NormKind::l2;
  throw std::invalid_argument("unknown norm '" + std::string(text) + "'");
}

inline double norm(std::span<const double> v, const Grid& grid, NormKind kind) {
  return kind == NormKind::inf ? norm_inf(v) : norm_l2(v, grid);
}

struct ErrorNorms {
  long n = 0;
  double linf = 0.0;
  double l2 = 0.0;
};

/// E^n = U_hat^n - U^n at every probe both trajectories share, plus the final step.
struct GlobalErrorSeries {
  std::vector<ErrorNorms> probes;
  ErrorNorms final_error;
  /// Norms of the low-precision and reference final states.
  Norms final_state;
  Norms reference_state;
  bool stagnated = false;

  /// u^-1 ||E^N|| / ||U_hat^N||, the deterministic-rounding measure.
  double rtn_measure(NormKind k, double u) const {
    const double e = k == NormKind::inf ? final_error.linf : final_error.l2;
    const double s = k == NormKind::inf ? final_state.linf : final_state.l2;
    return e / (u * s);
  }
  /// u^-1 ||E^N|| / ||U^N|| for one sample; averaged over samples this is
  /// the stochastic-rounding measure.
  double sr_measure(NormKind k, double u) const {
    const double e = k == NormKind::inf ? final_error.linf : final_error.l2;
    const double s = k == NormKind::inf ? reference_state.linf : reference_state.l2;
    return e / (u * s);
  }
};

inline ErrorNorms error_norms(long n, std::span<const double> a, std::span<const double> b,
                              const Grid& grid) {
  if (a.size() != b.size() || a.size() != grid.size())
    throw std::invalid_argument("trajectory shapes do not match");
  std::vector<double> e(a.size());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = a[i] - b[i];
  const auto nr = norms(e, grid);
  return {n, nr.linf, nr.l2};
}

inline GlobalErrorSeries global_error(const RunResult& run, const Trajectory& ref) {
  if (run.steps != ref.steps) throw std::invalid_argument("trajectories have different lengths");
  GlobalErrorSeries g;
  for (const auto& s : run.snapshots)
    if (const auto* r = ref.at(s.n)) g.probes.push_back(error_norms(s.n, s.U, *r, run.grid));
  g.final_error = error_norms(run.steps, run.final_state, ref.final_state, run.grid);
  g.final_state = norms(run.final_state, run.grid);
  g.reference_state = norms(ref.final_state, run.grid);
  g.stagnated = run.stagnated_at_initial;
  return g;
}

/// u^-1 max_n ||err^n||_inf / ||U_hat^N||_inf.
inline double local_error_measure(double max_local_inf, double final_state_inf, double u) {
  if (max_local_inf == 0.0) return 0.0;
  return max_local_inf / (u * final_state_inf);
}

inline double local_error_measure(std::span<const LocalErrorRecord> records,
                                  double LocalErrorRecord::*field, double final_state_inf,
                                  double u) {
  if (records.empty()) throw std::invalid_argument("no local error records");
  double m = 0.0;
  for (const auto& r : records) m = std::max(m, r.*field);
  return local_error_measure(m, final_state_inf, u);
}

struct SandwichResult {
  double lower = 0.0;
  double measure = 0.0;
  double upper = 0.0;
  bool pass = false;
  /// measure - lower and upper - measure.
  double lower_margin = 0.0;
  double upper_margin = 0.0;
};

/// Checks u^-1 ||fl(U_inf) - U_inf|| / D <= measure <= u^-1 ||U_hat^0 - U_inf|| / D.
/// The low-precision state is representable, so it can never be closer to the
/// steady state than the rounded steady state; and with a monotone approach
/// from the initial condition it never moves further away than where it
/// started. D is the denominator the measure itself uses.
inline SandwichResult rtn_sandwich_check(double measure, std::span<const double> initial,
                                         std::span<const double> steady, const Grid& grid,
                                         const FloatFormat& fmt, NormKind kind, double denominator,
                                         double rel_tol = 1e-12) {
  std::vector<double> lo(steady.size()), hi(steady.size());
  for (std::size_t i = 0; i < steady.size(); ++i) {
    lo[i] = round_rtn(steady[i], fmt).value - steady[i];
    hi[i] = initial[i] - steady[i];
  }
  const double u = fmt.unit();
  SandwichResult r;
  r.measure = measure;
  r.lower = norm(lo, grid, kind) / (u * denominator);
  r.upper = norm(hi, grid, kind) / (u * denominator);
  r.lower_margin = measure - r.lower;
  r.upper_margin = r.upper - measure;
  r.pass = measure >= r.lower * (1.0 - rel_tol) && measure <= r.upper * (1.0 + rel_tol);
  return r;
}

}  // namespace srheat
