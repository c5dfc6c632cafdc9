#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "srheat/heat/grid.hpp"
#include "srheat/heat/laplacian.hpp"
#include "srheat/heat/problem.hpp"
#include "srheat/softfloat/rng.hpp"
#include "srheat/softfloat/rounding.hpp"
#include "srheat/stepper/linear_solvers.hpp"
#include "srheat/stepper/scheme.hpp"

namespace srheat {

class InstabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// delta:   U^{n+1} = U^n + dU^n, the update evaluated first.
/// direct:  U^{n+1} = S(-dt A) U^n + dt S~(-dt A) F.
/// carrier: delta form in binary64 with no emulated rounding.
enum class Form { delta, direct, carrier };

inline const char* to_string(Form f) {
  switch (f) {
    case Form::delta: return "delta";
    case Form::direct: return "direct";
    case Form::carrier: return "carrier";
  }
  return "?";
}

inline Form parse_form(std::string_view text) {
  if (text == "delta") return Form::delta;
  if (text == "direct") return Form::direct;
  if (text == "carrier") return Form::carrier;
  throw std::invalid_argument("unknown form '" + std::string(text) + "'");
}

enum class LinearSolverKind { automatic, thomas, multigrid };

inline LinearSolverKind parse_solver(std::string_view text) {
  if (text == "auto") return LinearSolverKind::automatic;
  if (text == "thomas") return LinearSolverKind::thomas;
  if (text == "multigrid" || text == "mg") return LinearSolverKind::multigrid;
  throw std::invalid_argument("unknown linear solver '" + std::string(text) + "'");
}

struct StepConfig {
  double lambda = 0.0;
  double dt = 0.0;
  FloatFormat format = FloatFormat::bfloat16();
  Rounding mode = Rounding::nearest;
  Form form = Form::delta;
  MatvecKind matvec = MatvecKind::two_diff;
  LinearSolverKind solver = LinearSolverKind::automatic;
  MultigridOptions multigrid;
};

/// Builds a configuration with dt = lambda h^2 evaluated in the carrier.
/// Carrier form forces carrier rounding.
inline StepConfig make_step_config(const Grid& grid, double lambda, FloatFormat format,
                                   Rounding mode, Form form = Form::delta,
                                   MatvecKind matvec = MatvecKind::two_diff) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  StepConfig cfg;
  cfg.lambda = lambda;
  cfg.dt = lambda * grid.h() * grid.h();
  cfg.format = format;
  cfg.mode = form == Form::carrier ? Rounding::carrier : mode;
  cfg.form = form;
  cfg.matvec = matvec;
  if (cfg.mode == Rounding::carrier) cfg.form = Form::carrier;
  return cfg;
}

/// Steps needed to reach T = ceil(T_target / dt) dt.
inline long steps_to_reach(double T_target, double dt) {
  if (!(T_target > 0.0) || !(dt > 0.0)) throw std::invalid_argument("T and dt must be positive");
  return static_cast<long>(std::ceil(T_target / dt * (1.0 - 1e-14)));
}

struct SolverState {
  long n = 0;
  FieldVector U;
  RngStream rng;
  /// Consecutive steps that left every entry unchanged.
  int unchanged_steps = 0;
  /// Forcing rounded into the format at the start of the run.
  std::vector<double> forcing;
  int solver_failures = 0;
};

/// Per-node local rounding errors of one step.
struct LocalError {
  std::vector<double> EPS;
  std::vector<double> eps;
  std::vector<double> theta;
};

/// Infinity norms of the local rounding errors of step n. Direct-form steps
/// only carry EPS; eps and theta are then zero.
struct LocalErrorRecord {
  long n = 0;
  double EPS_inf = 0.0;
  double eps_inf = 0.0;
  double theta_inf = 0.0;
};

class Stepper {
 public:
  Stepper(Problem problem, Grid grid, RKScheme scheme, StepConfig cfg)
      : problem_(std::move(problem)), grid_(grid), scheme_(std::move(scheme)), cfg_(cfg) {
    if (problem_.d != grid_.d()) throw std::invalid_argument("problem and grid dimensions differ");
    if (cfg_.mode == Rounding::carrier) cfg_.form = Form::carrier;
    if (cfg_.form == Form::carrier) cfg_.mode = Rounding::carrier;
    if (cfg_.mode != Rounding::carrier) {
      require_emulatable(cfg_.format);
      if (!is_representable(problem_.G, cfg_.format))
        throw std::invalid_argument("boundary value is not representable in " + cfg_.format.name());
    }
    if (!(cfg_.lambda > 0.0) || !(cfg_.dt > 0.0)) throw std::invalid_argument("lambda and dt must be positive");
    if (!scheme_.implicit && !stable_on_spectrum(scheme_, grid_.d(), cfg_.lambda))
      throw std::invalid_argument("scheme " + scheme_.name + " is unstable for lambda = " +
                                  std::to_string(cfg_.lambda) + " in " + std::to_string(grid_.d()) + "D");
    if (scheme_.implicit) {
      const Polynomial& W = scheme_.denominator;
      if (W.degree() != 1 || W.coeff(0) != 1.0)
        throw std::invalid_argument("only implicit schemes with W(z) = 1 + w z are supported");
      mu_ = -W.coeff(1) * cfg_.lambda;
      if (!(mu_ > 0.0)) throw std::invalid_argument("implicit scheme is not A-stable here");
      if (solver() == LinearSolverKind::multigrid && !grid_.power_of_two())
        throw std::invalid_argument("multigrid needs K a power of two");
    }
    f_exact_ = sample(problem_.forcing, grid_);
    fbar_exact_ = forcing_with_boundary(problem_, grid_);
  }

  const Problem& problem() const { return problem_; }
  const Grid& grid() const { return grid_; }
  const RKScheme& scheme() const { return scheme_; }
  const StepConfig& config() const { return cfg_; }
  FloatFormat state_format() const {
    return cfg_.mode == Rounding::carrier ? FloatFormat::fp64() : cfg_.format;
  }

  /// Rounds the initial condition and the forcing into the format, drawing
  /// from the given stream under stochastic rounding.
  SolverState initial_state(std::uint64_t seed, std::uint64_t stream_id) const {
    SolverState s{0, FieldVector(grid_, state_format()), RngStream(seed, stream_id), 0, {}, 0};
    Arithmetic arith = arithmetic(s.rng);
    const auto u0 = sample(problem_.u0, grid_);
    for (std::size_t i = 0; i < u0.size(); ++i) s.U[i] = arith.round(u0[i]);
    const auto& f = cfg_.form == Form::direct ? fbar_exact_ : f_exact_;
    s.forcing.resize(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) s.forcing[i] = arith.round(f[i]);
    return s;
  }

  /// Advances the state by one step. When `local` is non-null the step is
  /// replayed in the carrier from the same U^n with the exact forcing and the
  /// local rounding errors are stored there.
  LocalErrorRecord step(SolverState& s, LocalError* local = nullptr) const {
    Arithmetic arith = arithmetic(s.rng);
    std::vector<double> deltas;
    std::vector<double> next = evaluate(s.U.values, s.forcing, arith, cfg_.form, &s.solver_failures,
                                        local != nullptr ? &deltas : nullptr);
    for (double v : next)
      if (!std::isfinite(v))
        throw InstabilityError("entry left the range of " + state_format().name() + " at step " +
                               std::to_string(s.n + 1));

    LocalErrorRecord rec;
    rec.n = s.n;
    if (local != nullptr) {
      const auto shadow = exact_step(s.U.values);
      const std::size_t m = next.size();
      local->EPS.assign(m, 0.0);
      local->eps.assign(m, 0.0);
      local->theta.assign(m, 0.0);
      if (cfg_.form != Form::carrier) {
        for (std::size_t i = 0; i < m; ++i) local->EPS[i] = next[i] - shadow[i];
        if (cfg_.form == Form::delta) {
          for (std::size_t i = 0; i < m; ++i) {
            local->eps[i] = deltas[i] * s.U[i];
            local->theta[i] = local->EPS[i] - local->eps[i];
          }
        }
      }
      rec.EPS_inf = norm_inf(local->EPS);
      rec.eps_inf = norm_inf(local->eps);
      rec.theta_inf = norm_inf(local->theta);
    }

    s.unchanged_steps = std::equal(next.begin(), next.end(), s.U.values.begin())
                            ? s.unchanged_steps + 1
                            : 0;
    s.U.values = std::move(next);
    ++s.n;
    return rec;
  }

  /// The one-step map in the carrier with the exact forcing, evaluated the
  /// same way as this configuration's form.
  std::vector<double> exact_step(std::span<const double> U) const {
    Arithmetic exact;
    const Form form = cfg_.form == Form::direct ? Form::direct : Form::carrier;
    return evaluate(U, form == Form::direct ? fbar_exact_ : f_exact_, exact, form, nullptr, nullptr);
  }

  /// Exact forcing without (f) and with (f + G h^-2 nb) the boundary data.
  const std::vector<double>& forcing_exact() const { return f_exact_; }
  const std::vector<double>& forcing_with_boundary_exact() const { return fbar_exact_; }

 private:
  LinearSolverKind solver() const {
    if (cfg_.solver != LinearSolverKind::automatic) return cfg_.solver;
    return grid_.d() == 1 ? LinearSolverKind::thomas : LinearSolverKind::multigrid;
  }

  Arithmetic arithmetic(RngStream& rng) const {
    if (cfg_.mode == Rounding::carrier) return Arithmetic();
    return Arithmetic(cfg_.format, cfg_.mode, &rng);
  }

  /// B y = lambda L0(y), the zero-boundary image of -dt A.
  std::vector<double> apply_B(std::span<const double> y, Arithmetic& a) const {
    auto out = apply_stencil(y, grid_, 0.0, cfg_.matvec, a);
    for (double& v : out) v = a.scale(v, cfg_.lambda);
    return out;
  }

  static double times(double c, double x, Arithmetic& a) { return c == 1.0 ? x : a.scale(x, c); }

  /// P(B) x by Horner's rule, each coefficient a carrier constant.
  std::vector<double> horner(const Polynomial& p, std::span<const double> x, Arithmetic& a) const {
    const int m = p.degree();
    std::vector<double> y(x.size());
    if (m < 0) return y;
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = times(p.coeff(m), x[i], a);
    for (int k = m - 1; k >= 0; --k) {
      auto by = apply_B(y, a);
      const double c = p.coeff(k);
      for (std::size_t i = 0; i < x.size(); ++i)
        y[i] = c == 0.0 ? by[i] : a.add(times(c, x[i], a), by[i]);
    }
    return y;
  }

  /// Solves W(B) x = rhs, W(z) = 1 - (mu/lambda) z.
  std::vector<double> solve_W(std::vector<double> rhs, Arithmetic& a, int* failures) const {
    const ShiftedLaplacian op{grid_, mu_};
    if (solver() == LinearSolverKind::thomas) return thomas_solve(op, rhs, a);
    const std::vector<double> guess(rhs.size(), 0.0);
    auto res = mg_solve(op, rhs, guess, a, cfg_.multigrid);
    if (!res.converged && failures != nullptr) ++*failures;
    return std::move(res.x);
  }

  /// One step of the given form. For the delta form, `deltas` receives the
  /// relative roundoff of the final addition U + dU per node.
  std::vector<double> evaluate(std::span<const double> U, std::span<const double> forcing,
                               Arithmetic& a, Form form, int* failures,
                               std::vector<double>* deltas) const {
    const std::size_t m = U.size();
    const double dt = cfg_.dt;
    if (form == Form::direct) {
      // S(B) U + S~(B) (dt fbar), sharing the denominator W
      auto y = horner(scheme_.numerator, U, a);
      std::vector<double> g(m);
      for (std::size_t i = 0; i < m; ++i) g[i] = a.scale(forcing[i], dt);
      const auto w = horner(scheme_.tilde_numerator, g, a);
      for (std::size_t i = 0; i < m; ++i) y[i] = a.add(y[i], w[i]);
      if (scheme_.implicit) y = solve_W(std::move(y), a, failures);
      return y;
    }
    // r = lambda L(U; G) + dt f = dt (-A U + F)
    auto r = apply_stencil(U, grid_, problem_.G, cfg_.matvec, a);
    for (std::size_t i = 0; i < m; ++i)
      r[i] = a.add(a.scale(r[i], cfg_.lambda), a.scale(forcing[i], dt));
    auto dU = horner(scheme_.tilde_numerator, r, a);
    if (scheme_.implicit) dU = solve_W(std::move(dU), a, failures);
    std::vector<double> next(m);
    const bool track = form == Form::delta && deltas != nullptr;
    if (track) deltas->resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      next[i] = a.add(U[i], dU[i]);
      if (track) {
        const double hi = U[i] + dU[i];
        const double lo = std::isfinite(hi) ? detail::two_sum_error(U[i], dU[i], hi) : 0.0;
        (*deltas)[i] = detail::relative_delta(next[i], hi, lo);
      }
    }
    return next;
  }

  Problem problem_;
  Grid grid_;
  RKScheme scheme_;
  StepConfig cfg_;
  double mu_ = 0.0;
  std::vector<double> f_exact_;
  std::vector<double> fbar_exact_;
};

struct RunOptions {
  /// Number of steps; 0 means ceil(T / dt).
  long steps = 0;
  double T = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  /// Step indices at which to keep a copy of the state.
  std::vector<long> probes;
  bool record_local = false;
  /// Keep every per-step record (otherwise only the running maxima).
  bool keep_records = false;
  int stagnation_window = 10;
  /// Deterministic runs that reach a fixed point skip the remaining steps;
  /// the skipped steps would repeat the same map on the same state.
  bool fast_forward = true;
};

struct Snapshot {
  long n = 0;
  std::vector<double> U;
};

struct RunResult {
  Grid grid{1, 2};
  StepConfig config;
  long steps = 0;
  double T = 0.0;
  std::vector<double> initial;  // rounded U^0
  std::vector<double> final_state;
  std::vector<Snapshot> snapshots;
  /// max over n of ||U^n||_inf
  double max_norm = 0.0;
  /// Initial condition rounding error ||U^0_rounded - U^0||_inf.
  double initial_error_inf = 0.0;
  LocalErrorRecord local_max;
  std::vector<LocalErrorRecord> records;
  /// The state stopped changing for a full stagnation window at some point.
  bool stagnated = false;
  long stagnation_step = -1;
  /// The final state equals the rounded initial condition bitwise.
  bool stagnated_at_initial = false;
  int solver_failures = 0;
};

/// Runs N steps from the rounded initial condition.
inline RunResult run(const Stepper& stepper, const RunOptions& opt = {}) {
  const long N = opt.steps > 0 ? opt.steps : steps_to_reach(opt.T, stepper.config().dt);
  RunResult res;
  res.grid = stepper.grid();
  res.config = stepper.config();
  res.steps = N;
  res.T = N * stepper.config().dt;

  SolverState s = stepper.initial_state(opt.seed, opt.stream_id);
  res.initial = s.U.values;
  {
    const auto u0 = sample(stepper.problem().u0, stepper.grid());
    for (std::size_t i = 0; i < u0.size(); ++i)
      res.initial_error_inf = std::max(res.initial_error_inf, std::fabs(s.U[i] - u0[i]));
  }
  res.max_norm = norm_inf(s.U.values);
  std::vector<long> probes = opt.probes;
  std::sort(probes.begin(), probes.end());
  std::size_t next_probe = 0;
  auto take_probes = [&](long upto, const std::vector<double>& U) {
    while (next_probe < probes.size() && probes[next_probe] <= upto) {
      if (probes[next_probe] >= 0) res.snapshots.push_back({probes[next_probe], U});
      ++next_probe;
    }
  };
  take_probes(0, s.U.values);

  const bool deterministic = stepper.config().mode != Rounding::stochastic;
  LocalError local;
  while (s.n < N) {
    const auto rec = stepper.step(s, opt.record_local ? &local : nullptr);
    if (opt.record_local) {
      res.local_max.EPS_inf = std::max(res.local_max.EPS_inf, rec.EPS_inf);
      res.local_max.eps_inf = std::max(res.local_max.eps_inf, rec.eps_inf);
      res.local_max.theta_inf = std::max(res.local_max.theta_inf, rec.theta_inf);
      if (opt.keep_records) res.records.push_back(rec);
    }
    res.max_norm = std::max(res.max_norm, norm_inf(s.U.values));
    if (s.unchanged_steps >= opt.stagnation_window && !res.stagnated) {
      res.stagnated = true;
      res.stagnation_step = s.n - s.unchanged_steps;
    }
    if (deterministic && opt.fast_forward && s.unchanged_steps >= 1 && !opt.keep_records) {
      const long start = s.n - s.unchanged_steps;
      if (!res.stagnated && N - start >= opt.stagnation_window) {
        res.stagnated = true;
        res.stagnation_step = start;
      }
      s.n = N;
    }
    take_probes(s.n, s.U.values);
  }
  res.final_state = s.U.values;
  res.stagnated_at_initial = res.final_state == res.initial;
  res.solver_failures = s.solver_failures;
  return res;
}

inline RunResult run(const Problem& problem, const Grid& grid, const RKScheme& scheme,
                     const StepConfig& cfg, const RunOptions& opt = {}) {
  return run(Stepper(problem, grid, scheme, cfg), opt);
}

}  // namespace srheat
