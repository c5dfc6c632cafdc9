#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "srheat/analysis/bounds.hpp"
#include "srheat/analysis/errors.hpp"
#include "srheat/analysis/montecarlo.hpp"
#include "srheat/analysis/rates.hpp"
#include "srheat/analysis/reference.hpp"
#include "srheat/cli/config.hpp"
#include "srheat/cli/csv.hpp"
#include "srheat/heat/problem.hpp"
#include "srheat/stepper/stepper.hpp"

namespace srheat::cli {

/// Everything needed to run one configuration of the time stepper.
struct CellSpec {
  Problem problem;
  Grid grid{1, 2};
  RKScheme scheme;
  StepConfig cfg;
  long steps = 0;
  std::uint64_t seed = 1;
  /// Sample i draws from stream stream_base + i.
  std::uint64_t stream_base = 0;
  MCOptions mc;
  int stagnation_window = 10;
};

inline CellSpec make_cell(const ExperimentConfig& c, int K, double lambda, Rounding mode,
                          const Implementation& impl, std::uint64_t stream_base) {
  CellSpec s;
  s.problem = c.problem.empty() ? test_problem(c.d, c.G) : problem_by_name(c.problem, c.G);
  s.grid = Grid(c.d, K);
  s.scheme = scheme(c.scheme);
  s.cfg = make_step_config(s.grid, lambda, c.format, mode, impl.form, impl.matvec);
  s.cfg.solver = c.solver;
  s.cfg.multigrid = c.multigrid;
  s.steps = steps_to_reach(c.T, s.cfg.dt);
  s.seed = c.seed;
  s.stream_base = stream_base;
  s.mc = c.mc;
  s.stagnation_window = c.stagnation_window;
  return s;
}

/// Normalized global rounding error of one configuration, in units of u.
/// Deterministic rounding divides by the low-precision final state; stochastic
/// rounding estimates E||E^N||_inf and E[||E^N||_L2^2]^{1/2} and divides by
/// the exact final state.
struct GlobalCellResult {
  MCEstimate inf;
  MCEstimate l2;
  /// max over samples and steps of ||U_hat^n||_inf.
  double M = 0.0;
  bool stagnated_at_initial = false;
  /// Closed-form bounds normalized like the measures (absent for carrier runs).
  std::optional<double> bound_inf;
  std::optional<double> bound_l2;
  /// Per-sample normalized {inf, l2} measures.
  std::vector<std::vector<double>> samples;
  /// Per-sample u^-1 ||U_hat^N - U_inf||_inf / ||U_inf||_inf against the discrete steady state.
  std::vector<double> steady_errors;
  int solver_failures = 0;
};

inline GlobalCellResult global_cell(const CellSpec& spec, unsigned workers = 0) {
  const Stepper stepper(spec.problem, spec.grid, spec.scheme, spec.cfg);
  const Trajectory ref = reference_run(spec.problem, spec.grid, spec.scheme, spec.cfg, spec.steps);
  const auto steady = discrete_steady_state(spec.problem, spec.grid);
  const double steady_inf = norm_inf(steady);
  const double u = spec.cfg.format.unit();
  const Rounding mode = stepper.config().mode;
  const bool deterministic = mode != Rounding::stochastic;
  const Norms ref_norms = norms(ref.final_state, spec.grid);

  const std::size_t cap = deterministic ? 1 : spec.mc.max_samples;
  std::vector<double> Ms(cap, 0.0), steady_err(cap, 0.0);
  std::vector<char> stag(cap, 0);
  std::vector<int> failures(cap, 0);
  std::vector<double> denominators(2, 0.0);

  auto sample = [&](std::size_t i) {
    RunOptions opt;
    opt.steps = spec.steps;
    opt.seed = spec.seed;
    opt.stream_id = spec.stream_base + i;
    opt.stagnation_window = spec.stagnation_window;
    const RunResult r = run(stepper, opt);
    const auto g = global_error(r, ref);
    Ms[i] = r.max_norm;
    stag[i] = r.stagnated_at_initial;
    failures[i] = r.solver_failures;
    std::vector<double> e(r.final_state.size());
    for (std::size_t j = 0; j < e.size(); ++j) e[j] = r.final_state[j] - steady[j];
    steady_err[i] = norm_inf(e) / (u * steady_inf);
    if (deterministic) {
      denominators = {g.final_state.linf, g.final_state.l2};
      return std::vector<double>{g.rtn_measure(NormKind::inf, u), g.rtn_measure(NormKind::l2, u)};
    }
    return std::vector<double>{g.sr_measure(NormKind::inf, u), g.sr_measure(NormKind::l2, u)};
  };
  MCOptions mc = spec.mc;
  mc.workers = workers;
  const Estimator kinds[] = {Estimator::mean, Estimator::root_mean_square};
  const MCResult mcr = mc_expectation(sample, kinds, deterministic, mc);
  if (!deterministic) denominators = {ref_norms.linf, ref_norms.l2};

  GlobalCellResult res;
  res.inf = mcr.estimates[0];
  res.l2 = mcr.estimates[1];
  res.samples = mcr.samples;
  const std::size_t used = mcr.samples.size();
  for (std::size_t i = 0; i < used; ++i) {
    res.M = std::max(res.M, Ms[i]);
    res.stagnated_at_initial = res.stagnated_at_initial || stag[i];
    res.solver_failures += failures[i];
    res.steady_errors.push_back(steady_err[i]);
  }
  if (mode != Rounding::carrier) {
    try {
      const auto bp = make_bound_params(mode, spec.cfg.format, res.M, spec.scheme, spec.grid.d(),
                                        spec.grid.K(), spec.cfg.lambda, spec.cfg.dt);
      res.bound_inf = predicted_global_bound(mode, NormKind::inf, bp) / (u * denominators[0]);
      res.bound_l2 = predicted_global_bound(mode, NormKind::l2, bp) / (u * denominators[1]);
    } catch (const std::domain_error&) {
      // the series bounds do not apply to this scheme and lambda
    }
  }
  return res;
}

/// Worst local rounding errors over the run (and over realizations under
/// stochastic rounding), each normalized by u ||U_hat^N||_inf.
struct LocalCellResult {
  double theta = 0.0;
  double eps = 0.0;
  double EPS = 0.0;
  std::size_t samples = 0;
  bool stagnated_at_initial = false;
};

inline LocalCellResult local_cell(const CellSpec& spec, int realizations, unsigned workers = 0) {
  const Stepper stepper(spec.problem, spec.grid, spec.scheme, spec.cfg);
  const double u = spec.cfg.format.unit();
  const bool deterministic = stepper.config().mode != Rounding::stochastic;
  const std::size_t n = deterministic ? 1 : static_cast<std::size_t>(realizations);
  std::vector<LocalCellResult> per(n);
  parallel_for(
      n,
      [&](std::size_t i) {
        RunOptions opt;
        opt.steps = spec.steps;
        opt.seed = spec.seed;
        opt.stream_id = spec.stream_base + i;
        opt.record_local = true;
        opt.stagnation_window = spec.stagnation_window;
        const RunResult r = run(stepper, opt);
        const double fin = norm_inf(r.final_state);
        per[i].theta = local_error_measure(r.local_max.theta_inf, fin, u);
        per[i].eps = local_error_measure(r.local_max.eps_inf, fin, u);
        per[i].EPS = local_error_measure(r.local_max.EPS_inf, fin, u);
        per[i].stagnated_at_initial = r.stagnated_at_initial;
      },
      workers > 0 ? workers : worker_count());
  LocalCellResult res;
  res.samples = n;
  for (const auto& p : per) {
    res.theta = std::max(res.theta, p.theta);
    res.eps = std::max(res.eps, p.eps);
    res.EPS = std::max(res.EPS, p.EPS);
    res.stagnated_at_initial = res.stagnated_at_initial || p.stagnated_at_initial;
  }
  return res;
}

struct ExperimentOutput {
  std::vector<ResultRow> rows;
  PlotSeries series;
  /// Messages of cells that failed; their rows carry measure_kind "failed".
  std::vector<std::string> errors;
};

namespace detail {

inline ResultRow base_row(const ExperimentConfig& c, long run_id) {
  ResultRow r;
  r.run_id = run_id;
  r.subcommand = to_string(c.subcommand);
  r.d = c.d;
  r.scheme = c.scheme;
  r.format = c.format.name();
  r.seed = c.seed;
  return r;
}

inline ResultRow cell_row(const ExperimentConfig& c, long run_id, const CellSpec& s) {
  ResultRow r = base_row(c, run_id);
  r.mode = to_string(s.cfg.mode);
  r.form = to_string(s.cfg.form);
  r.matvec = to_string(s.cfg.matvec);
  r.h = s.grid.h();
  r.dt = s.cfg.dt;
  r.lambda = s.cfg.lambda;
  return r;
}

inline std::string series_name(std::initializer_list<std::string> parts) {
  std::string s;
  for (const auto& p : parts) {
    if (!s.empty()) s += '.';
    for (char ch : p) s += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-') ? ch : '_';
  }
  return s;
}

/// A unit of work: one configuration producing rows and plot points.
struct Cell {
  CellSpec spec;
  long run_id = 0;
  std::vector<ResultRow> rows;
  std::vector<std::pair<std::string, std::vector<double>>> points;
  std::string error;
};

/// Runs cells on the worker pool. Each cell gets a share of the workers for
/// its own Monte Carlo samples; results are independent of the split.
template <class Fn>
void run_cells(std::vector<Cell>& cells, Fn&& fn) {
  const unsigned total = worker_count();
  const unsigned outer = static_cast<unsigned>(std::min<std::size_t>(total, std::max<std::size_t>(1, cells.size())));
  const unsigned inner = std::max(1u, total / outer);
  parallel_for(
      cells.size(),
      [&](std::size_t i) {
        try {
          fn(cells[i], inner);
        } catch (const std::exception& e) {
          cells[i].error = e.what();
        }
      },
      outer);
}

inline void collect(const ExperimentConfig& c, std::vector<Cell>& cells, ExperimentOutput& out) {
  for (auto& cell : cells) {
    if (!cell.error.empty()) {
      ResultRow r = cell_row(c, cell.run_id, cell.spec);
      r.measure_kind = "failed";
      out.rows.push_back(r);
      out.errors.push_back("run " + std::to_string(cell.run_id) + ": " + cell.error);
      continue;
    }
    for (auto& r : cell.rows) out.rows.push_back(std::move(r));
    for (auto& [name, pt] : cell.points) out.series[name].push_back(std::move(pt));
  }
}

inline void add_estimate(ResultRow& r, const MCEstimate& e, bool stochastic) {
  r.value = e.mean;
  r.samples = static_cast<long>(e.samples);
  if (stochastic) {
    r.ci_low = e.ci_low;
    r.ci_high = e.ci_high;
  }
}

inline void global_rows(const ExperimentConfig& c, Cell& cell, unsigned workers, bool by_lambda) {
  const auto res = global_cell(cell.spec, workers);
  const bool sr = cell.spec.cfg.mode == Rounding::stochastic;
  const double x = by_lambda ? cell.spec.cfg.lambda : cell.spec.cfg.dt;
  for (NormKind nk : c.norms) {
    const MCEstimate& e = nk == NormKind::inf ? res.inf : res.l2;
    ResultRow r = cell_row(c, cell.run_id, cell.spec);
    r.norm = to_string(nk);
    r.measure_kind = "global";
    add_estimate(r, e, sr);
    r.stagnated = res.stagnated_at_initial;
    cell.rows.push_back(r);
    const auto& bound = nk == NormKind::inf ? res.bound_inf : res.bound_l2;
    if (bound) {
      ResultRow b = cell_row(c, cell.run_id, cell.spec);
      b.norm = to_string(nk);
      b.measure_kind = "bound";
      b.value = *bound;
      b.samples = r.samples;
      b.stagnated = r.stagnated;
      cell.rows.push_back(b);
    }
    const std::string name = series_name({by_lambda ? "lambda-sweep" : "global", to_string(cell.spec.cfg.mode),
                                          to_string(cell.spec.cfg.form), to_string(cell.spec.cfg.matvec),
                                          to_string(nk)});
    cell.points.push_back({name, {x, e.mean, e.ci_low, e.ci_high, r.stagnated ? 1.0 : 0.0}});
  }
  ResultRow m = cell_row(c, cell.run_id, cell.spec);
  m.norm = "inf";
  m.measure_kind = "max_state";
  m.value = res.M;
  m.samples = static_cast<long>(res.inf.samples);
  m.stagnated = res.stagnated_at_initial;
  cell.rows.push_back(m);
  if (res.solver_failures > 0) {
    ResultRow f = m;
    f.measure_kind = "solver_nonconvergence";
    f.value = res.solver_failures;
    cell.rows.push_back(f);
  }
}

inline std::vector<Cell> sweep_cells(const ExperimentConfig& c, bool by_lambda) {
  std::vector<Cell> cells;
  long id = 0;
  const std::vector<double> lambdas = by_lambda ? c.lambdas : std::vector<double>{c.lambda};
  for (int K : c.K)
    for (double lam : lambdas)
      for (Rounding mode : c.modes)
        for (const auto& impl : c.implementations) {
          Cell cell;
          cell.run_id = id;
          cell.spec = make_cell(c, K, lam, mode, impl, static_cast<std::uint64_t>(id + 1) << 32);
          cells.push_back(std::move(cell));
          ++id;
        }
  return cells;
}

inline ExperimentOutput run_global(const ExperimentConfig& c, bool by_lambda) {
  auto cells = sweep_cells(c, by_lambda);
  run_cells(cells, [&](Cell& cell, unsigned w) { global_rows(c, cell, w, by_lambda); });
  ExperimentOutput out;
  collect(c, cells, out);
  return out;
}

inline ExperimentOutput run_local(const ExperimentConfig& c) {
  auto cells = sweep_cells(c, false);
  run_cells(cells, [&](Cell& cell, unsigned w) {
    const auto res = local_cell(cell.spec, c.local_samples, w);
    auto add = [&](const char* kind, double v) {
      ResultRow r = cell_row(c, cell.run_id, cell.spec);
      r.norm = "inf";
      r.measure_kind = kind;
      r.value = v;
      r.samples = static_cast<long>(res.samples);
      r.stagnated = res.stagnated_at_initial;
      cell.rows.push_back(r);
      cell.points.push_back({series_name({"local", to_string(cell.spec.cfg.mode), to_string(cell.spec.cfg.form),
                                          to_string(cell.spec.cfg.matvec), kind}),
                             {cell.spec.cfg.dt, v}});
    };
    if (cell.spec.cfg.form == Form::delta) {
      add("theta", res.theta);
      add("eps", res.eps);
    }
    add("EPS", res.EPS);
  });
  ExperimentOutput out;
  collect(c, cells, out);
  return out;
}

inline ExperimentOutput run_solution(const ExperimentConfig& c) {
  auto cells = sweep_cells(c, false);
  run_cells(cells, [&](Cell& cell, unsigned) {
    const CellSpec& s = cell.spec;
    const Stepper stepper(s.problem, s.grid, s.scheme, s.cfg);
    RunOptions opt;
    opt.steps = s.steps;
    opt.seed = s.seed;
    opt.stream_id = s.stream_base;
    opt.stagnation_window = s.stagnation_window;
    const RunResult r = run(stepper, opt);
    const auto steady = discrete_steady_state(s.problem, s.grid);
    const double u = s.cfg.format.unit();
    std::vector<double> e(steady.size());
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = r.final_state[i] - steady[i];
    for (NormKind nk : c.norms) {
      ResultRow row = cell_row(c, cell.run_id, s);
      row.norm = to_string(nk);
      row.measure_kind = "steady_error";
      row.value = norm(e, s.grid, nk) / (u * norm(steady, s.grid, nk));
      row.samples = 1;
      row.stagnated = r.stagnated_at_initial;
      cell.rows.push_back(row);
    }
    ResultRow fin = cell_row(c, cell.run_id, s);
    fin.norm = "inf";
    fin.measure_kind = "final_max";
    fin.value = norm_inf(r.final_state);
    fin.samples = 1;
    fin.stagnated = r.stagnated_at_initial;
    cell.rows.push_back(fin);
    const std::string tag = "h" + std::to_string(s.grid.K());
    const std::string name = series_name({"solution", tag, to_string(s.cfg.mode), to_string(s.cfg.form)});
    const std::string steady_name = series_name({"solution", tag, "steady"});
    const bool first_of_mesh =
        cell.run_id % static_cast<long>(c.modes.size() * c.implementations.size()) == 0;
    for (std::size_t i = 0; i < r.final_state.size(); ++i) {
      const auto x = s.grid.coords(i);
      std::vector<double> pt(x.begin(), x.begin() + s.grid.d());
      auto st = pt;
      pt.push_back(r.final_state[i]);
      st.push_back(steady[i]);
      cell.points.push_back({name, pt});
      if (first_of_mesh) cell.points.push_back({steady_name, st});
    }
  });
  ExperimentOutput out;
  collect(c, cells, out);
  return out;
}

inline ExperimentOutput run_bounds(const ExperimentConfig& c) {
  ExperimentOutput out;
  const RKScheme sc = scheme(c.scheme);
  long id = 0;
  for (int K : c.K) {
    const Grid grid(c.d, K);
    const double dt = c.lambda * grid.h() * grid.h();
    auto row = [&](const std::string& mode, const std::string& nrm, const std::string& kind, double v) {
      ResultRow r = base_row(c, id);
      r.mode = mode;
      r.norm = nrm;
      r.measure_kind = kind;
      r.h = grid.h();
      r.dt = dt;
      r.lambda = c.lambda;
      r.value = v;
      out.rows.push_back(r);
      out.series[series_name({"bounds", mode.empty() ? "all" : mode, nrm.empty() ? "none" : nrm, kind})]
          .push_back({dt, v});
    };
    try {
      const auto sb = phi_bound_and_sums(sc, c.d, dt, c.lambda, K);
      row("", "", "s0", sb.split.s0);
      row("", "", "alpha0", sb.split.alpha0);
      row("", "", "sum_inv_1_minus_S2", sb.sums.inv_one_minus_sq);
      row("", "", "sum_inv_1_minus_absS", sb.sums.inv_one_minus_abs);
      row("", "", "phi", sb.phi);
      row("", "", "sum_inv_1_minus_absS_sq", sb.sums.inv_one_minus_abs_sq);
      row("", "", "c_bar_sq", sb.c_bar_sq);
      row("", "", "sum_ones_weighted", sb.sums.weighted_ones);
      row("", "", "c_tilde", sb.c_tilde);
      row("", "", "lattice_inv_square", lattice_sum(c.d, K - 1, 2));
      row("", "", "lattice_inv_square_bound", inverse_square_bound(c.d, K - 1));
      row("", "", "lattice_inv_fourth", lattice_sum(c.d, K - 1, 4));
      row("", "", "lattice_inv_fourth_bound", inverse_fourth_bound(c.d));
      for (Rounding mode : {Rounding::nearest, Rounding::stochastic}) {
        // M = 1: bounds in units of u_bar-scaled state magnitude
        const auto bp = make_bound_params(mode, c.format, 1.0, sc, c.d, K, c.lambda, dt);
        for (NormKind nk : c.norms)
          row(to_string(mode), to_string(nk), "predicted_bound",
              predicted_global_bound(mode, nk, bp) / c.format.unit());
      }
    } catch (const std::exception& e) {
      ResultRow r = base_row(c, id);
      r.measure_kind = "failed";
      r.h = grid.h();
      r.dt = dt;
      r.lambda = c.lambda;
      out.rows.push_back(r);
      out.errors.push_back("run " + std::to_string(id) + ": " + e.what());
    }
    ++id;
  }
  return out;
}

inline ExperimentOutput fit_rates(const ExperimentConfig& c, const std::vector<ResultRow>& global) {
  using Key = std::tuple<int, std::string, std::string, std::string, std::string, std::string, double, std::string>;
  std::map<Key, std::vector<const ResultRow*>> groups;
  std::vector<Key> order;
  for (const auto& r : global) {
    if (r.measure_kind != "global" || !r.dt || !r.value) continue;
    Key k{r.d, r.scheme, r.format, r.mode, r.form, r.matvec, r.lambda.value_or(0.0), r.norm};
    if (!groups.count(k)) order.push_back(k);
    groups[k].push_back(&r);
  }
  ExperimentOutput out;
  long id = 0;
  for (const auto& k : order) {
    const auto& rows = groups[k];
    ResultRow base;
    base.run_id = id;
    base.subcommand = to_string(c.subcommand);
    base.d = std::get<0>(k);
    base.scheme = std::get<1>(k);
    base.format = std::get<2>(k);
    base.mode = std::get<3>(k);
    base.form = std::get<4>(k);
    base.matvec = std::get<5>(k);
    base.lambda = std::get<6>(k);
    base.norm = std::get<7>(k);
    base.seed = rows.front()->seed;
    std::vector<RatePoint> pts;
    for (const auto* r : rows) pts.push_back({*r->dt, *r->value, r->stagnated || !(*r->value > 0.0)});
    try {
      const auto fit = fit_rate(pts);
      ResultRow s = base;
      s.measure_kind = "slope";
      s.value = fit.slope;
      s.samples = static_cast<long>(fit.used);
      out.rows.push_back(s);
      ResultRow res = base;
      res.measure_kind = "fit_residual";
      res.value = fit.residual;
      res.samples = static_cast<long>(fit.used);
      out.rows.push_back(res);
      auto& series = out.series[series_name({"rates", base.mode, base.form, base.matvec, base.norm})];
      for (const auto& p : pts)
        if (!p.excluded) series.push_back({p.dt, p.value, std::exp(fit.intercept) * std::pow(p.dt, fit.slope)});
    } catch (const std::exception& e) {
      ResultRow f = base;
      f.measure_kind = "failed";
      out.rows.push_back(f);
      out.errors.push_back("rate group " + std::to_string(id) + ": " + e.what());
    }
    ++id;
  }
  return out;
}

}  // namespace detail

/// Runs one subcommand. Cells that fail produce a "failed" row and an error
/// message instead of aborting the whole sweep.
inline ExperimentOutput run_experiment(const ExperimentConfig& c) {
  switch (c.subcommand) {
    case Subcommand::solution: return detail::run_solution(c);
    case Subcommand::local: return detail::run_local(c);
    case Subcommand::global: return detail::run_global(c, false);
    case Subcommand::lambda_sweep: return detail::run_global(c, true);
    case Subcommand::bounds: return detail::run_bounds(c);
    case Subcommand::rates: {
      if (!c.input.empty()) return detail::fit_rates(c, read_csv(c.input));
      ExperimentConfig g = c;
      g.subcommand = Subcommand::global;
      auto global = detail::run_global(g, false);
      auto out = detail::fit_rates(c, global.rows);
      out.errors.insert(out.errors.begin(), global.errors.begin(), global.errors.end());
      return out;
    }
  }
  return {};
}

}  // namespace srheat::cli
