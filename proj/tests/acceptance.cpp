// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "srheat/srheat.hpp"

using namespace srheat;
using namespace srheat::cli;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

ExperimentConfig config_for(Subcommand sub, const std::string& text) {
  ConfigMap map;
  map.parse_text(text, "acceptance");
  return make_config(sub, map);
}

const oracle::Table& table_for(const FloatFormat& f) {
  static const oracle::Table bf16(oracle::enumerate_format(8, 8));
  static const oracle::Table fp16(oracle::enumerate_format(11, 5));
  return f == FloatFormat::bfloat16() ? bf16 : fp16;
}

const FloatFormat kFormats[] = {FloatFormat::bfloat16(), FloatFormat::fp16()};

/// A random carrier value inside the normal range of `f`, away from its ends.
double random_normal_value(const FloatFormat& f, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> mant(1.0, 2.0);
  std::uniform_int_distribution<int> ex(f.e_min() + 1, f.e_max() - 2);
  std::bernoulli_distribution neg(0.5);
  const double x = std::ldexp(mant(gen), ex(gen));
  return neg(gen) ? -x : x;
}

Verdict c1_unbiased() {
  constexpr int kValues = 100, kDraws = 10000;
  std::mt19937_64 gen(1001);
  double worst = 0.0;  // largest |p_hat - p| / sigma
  int bad = 0;
  for (const auto& f : kFormats) {
    const auto& tab = table_for(f);
    RngStream rng(17, f.t());
    for (int v = 0; v < kValues; ++v) {
      double x;
      do x = random_normal_value(f, gen);
      while (is_representable(x, f));
      const auto [a, b] = tab.neighbors(x);
      const double p = (std::fabs(x) - std::fabs(a)) / (std::fabs(b) - std::fabs(a));
      int up = 0;
      for (int i = 0; i < kDraws; ++i) up += round_sr(x, f, rng).value == b;
      const double sigma = std::sqrt(p * (1 - p) / kDraws);
      const double z = std::fabs(up / double(kDraws) - p) / sigma;
      worst = std::max(worst, z);
      bad += z > 4.0;
    }
  }
  return {bad == 0, "worst deviation " + fmt("%.2f", worst) + " sigma over 200 values"};
}

Verdict c2_roundoff() {
  constexpr int kPairs = 100000;
  std::mt19937_64 gen(2002);
  std::uniform_int_distribution<int> pick(0, 3);
  double worst_rtn = 0.0, worst_sr = 0.0;
  long checked = 0, violations = 0;
  for (const auto& f : kFormats) {
    const auto& tab = table_for(f);
    const double u = f.unit();
    RngStream rng(3, f.t());
    for (int i = 0; i < kPairs; ++i) {
      // magnitudes within a few binades keep most results normal
      std::uniform_real_distribution<double> mag(-4.0, 4.0);
      const double a = tab.nearest(std::exp2(mag(gen)) * (pick(gen) < 2 ? 1 : -1));
      const double b = tab.nearest(std::exp2(mag(gen)) * (pick(gen) < 2 ? 1 : -1));
      const Op op = static_cast<Op>(pick(gen));
      double exact;
      switch (op) {
        case Op::add: exact = a + b; break;
        case Op::sub: exact = a - b; break;
        case Op::mul: exact = a * b; break;
        default: exact = a / b; break;
      }
      const double ax = std::fabs(exact);
      if (ax != 0.0 && (ax < f.x_min() || ax > f.x_max())) continue;
      for (Rounding mode : {Rounding::nearest, Rounding::stochastic}) {
        const auto [r, ev] = rounded_op({a, f}, {b, f}, op, mode, &rng);
        const double mag = std::fabs(ev.delta);
        if (mode == Rounding::nearest) {
          violations += !(mag <= u / (1 + u));
          worst_rtn = std::max(worst_rtn, mag / (u / (1 + u)));
        } else {
          violations += !(mag < 2 * u);
          worst_sr = std::max(worst_sr, mag / u);
        }
      }
      ++checked;
    }
  }
  return {violations == 0, std::to_string(checked) + " normal-range pairs, " + std::to_string(violations) +
                              " violations, max |delta|(1+u)/u = " +
                    fmt("%.6f", worst_rtn) + " (RtN), max |delta|/u = " + fmt("%.6f", worst_sr) +
                    " (SR)"};
}

Verdict c3_exactness() {
  constexpr int kTarget = 10000;
  long failures = 0;
  std::string counts;
  for (const auto& f : kFormats) {
    const auto& tab = table_for(f);
    std::mt19937_64 gen(3003);
    RngStream rng(5, 5);
    int n_i = 0, n_ii = 0, n_iii = 0;
    while (n_i < kTarget || n_ii < kTarget || n_iii < kTarget) {
      const auto [a, b, c] = oracle::nearby_triple(tab, gen, 1.2);
      if (!oracle::condition_i(a, b, c)) continue;
      const bool ii = oracle::condition_ii(a, b, c), iii = oracle::condition_iii(a, b, c);
      for (Rounding mode : {Rounding::nearest, Rounding::stochastic}) {
        Arithmetic arith(f, mode, &rng);
        const double x = arith.sub(a, b), y = arith.sub(b, c);
        failures += x != a - b || y != b - c;
        if (ii || iii) failures += arith.sub(x, y) != (a - b) - (b - c);
      }
      ++n_i;
      n_ii += ii;
      n_iii += iii;
    }
    counts += " " + f.name() + ":" + std::to_string(n_i) + "/" + std::to_string(n_ii) + "/" +
              std::to_string(n_iii);
  }
  return {failures == 0, std::to_string(failures) + " inexact differences; triples (i)/(ii)/(iii)" + counts};
}

Verdict c4_oracles() {
  double worst = 0.0;
  for (const char* name : {"FE", "BE", "CN"}) {
    const RKScheme sc = scheme(name);
    for (int d : {1, 2})
      for (int K : {4, 8, 16}) {
        const Grid g(d, K);
        const Problem p = test_problem(d, 1.0);
        const double lambda = sc.implicit ? 2.0 : 0.4375 / d;
        const StepConfig cfg = make_step_config(g, lambda, FloatFormat::bfloat16(), Rounding::carrier,
                                                Form::carrier, MatvecKind::two_diff);
        const long steps = steps_to_reach(1.0, cfg.dt);
        const auto a = spectral_reference(p, g, sc, cfg.dt, steps).final_state;
        const auto b = reference_run(p, g, sc, cfg, steps).final_state;
        std::vector<double> diff(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
        worst = std::max(worst, norm_inf(diff) / norm_inf(b));
      }
  }
  return {worst <= 1e-10, "max relative difference " + fmt("%.3g", worst)};
}

/// One mesh of a global sweep with its result.
struct SweepPoint {
  CellSpec spec;
  GlobalCellResult result;
};

std::vector<SweepPoint> global_sweep(const ExperimentConfig& c, Rounding mode, std::uint64_t stream_tag) {
  std::vector<SweepPoint> pts;
  for (std::size_t i = 0; i < c.K.size(); ++i) {
    SweepPoint p;
    p.spec = make_cell(c, c.K[i], c.lambda, mode, c.implementations.front(),
                       (stream_tag << 40) | (std::uint64_t(i + 1) << 32));
    p.result = global_cell(p.spec);
    pts.push_back(std::move(p));
  }
  return pts;
}

std::string describe(const std::vector<SweepPoint>& pts, NormKind nk) {
  std::ostringstream s;
  for (const auto& p : pts) {
    const auto& e = nk == NormKind::inf ? p.result.inf : p.result.l2;
    s << " K=" << p.spec.grid.K() << ":" << fmt("%.4g", e.mean);
    if (p.result.samples.size() > 1) s << "(n=" << e.samples << ")";
    if (p.result.stagnated_at_initial) s << "[stagnated]";
  }
  return s.str();
}

RateFit fit(const std::vector<SweepPoint>& pts, NormKind nk, bool drop_stagnated) {
  std::vector<RatePoint> r;
  for (const auto& p : pts)
    r.push_back({p.spec.cfg.dt, (nk == NormKind::inf ? p.result.inf : p.result.l2).mean,
                 drop_stagnated && p.result.stagnated_at_initial});
  return fit_rate(r);
}

Verdict slope_in(const std::vector<SweepPoint>& pts, NormKind nk, bool drop_stagnated, double lo, double hi) {
  try {
    const RateFit f = fit(pts, nk, drop_stagnated);
    return {f.slope >= lo && f.slope <= hi,
            "slope " + fmt("%.3f", f.slope) + " over " + std::to_string(f.used) + " points;" + describe(pts, nk)};
  } catch (const std::exception& e) {
    return {false, std::string("rate fit failed: ") + e.what() + ";" + describe(pts, nk)};
  }
}

/// Measured errors against the closed-form bounds for one sweep.
bool dominated(const std::vector<SweepPoint>& pts, Rounding mode, std::string& note) {
  bool ok = true;
  for (const auto& p : pts)
    for (NormKind nk : {NormKind::inf, NormKind::l2}) {
      const auto& e = nk == NormKind::inf ? p.result.inf : p.result.l2;
      const auto& bound = nk == NormKind::inf ? p.result.bound_inf : p.result.bound_l2;
      const double measured = mode == Rounding::stochastic ? e.ci_high : e.mean;
      if (!bound || !(measured <= *bound)) {
        ok = false;
        note += " d=" + std::to_string(p.spec.grid.d()) + " K=" + std::to_string(p.spec.grid.K()) + " " +
                to_string(nk) + ": " + fmt("%.4g", measured) + " > " + (bound ? fmt("%.4g", *bound) : "none");
      }
    }
  return ok;
}

Verdict c8_stagnation() {
  const auto c = config_for(Subcommand::global, "h = 2^-7\nmodes = rtn\nG = 1\n");
  const CellSpec s = make_cell(c, 128, c.lambda, Rounding::nearest, c.implementations.front(), 0);
  const Stepper stepper(s.problem, s.grid, s.scheme, s.cfg);
  RunOptions opt;
  opt.steps = s.steps;
  const RunResult r = run(stepper, opt);
  bool bitwise = r.final_state.size() == r.initial.size();
  for (std::size_t i = 0; bitwise && i < r.initial.size(); ++i)
    bitwise = std::bit_cast<std::uint64_t>(r.final_state[i]) == std::bit_cast<std::uint64_t>(r.initial[i]);
  std::vector<double> ic(r.initial.size());
  const auto u0 = sample(s.problem.u0, s.grid);
  for (std::size_t i = 0; i < ic.size(); ++i) ic[i] = round_rtn(u0[i], s.cfg.format).value;
  for (std::size_t i = 0; bitwise && i < ic.size(); ++i) bitwise = r.final_state[i] == ic[i];

  const auto ref = reference_run(s.problem, s.grid, s.scheme, s.cfg, s.steps);
  const auto g = global_error(r, ref);
  const double u = s.cfg.format.unit();
  const double measure = g.rtn_measure(NormKind::inf, u);
  const auto steady = discrete_steady_state(s.problem, s.grid);
  const auto sw = rtn_sandwich_check(measure, r.initial, steady, s.grid, s.cfg.format, NormKind::inf,
                                     g.final_state.linf, 1e-3);
  const double gap = std::fabs(sw.upper - measure) / sw.upper;
  return {bitwise && sw.pass && gap <= 0.01,
          std::string(bitwise ? "final state equals rounded IC" : "final state differs from IC") + "; " +
              fmt("%.5g", sw.lower) + " <= " + fmt("%.5g", measure) + " <= " + fmt("%.5g", sw.upper) +
              ", gap to upper " + fmt("%.3g", gap)};
}

Verdict c9_floor(const SweepPoint& p) {
  const auto& e = p.result.steady_errors;
  std::size_t ok = 0;
  double worst = 0.0;
  for (double v : e) {
    ok += v <= 10.0;
    worst = std::max(worst, v);
  }
  const double frac = e.empty() ? 0.0 : double(ok) / e.size();
  return {frac >= 0.95, fmt("%.1f", 100 * frac) + "% of " + std::to_string(e.size()) +
                            " samples within 10u (worst " + fmt("%.3g", worst) + "u)"};
}

Verdict c10_sweep() {
  const auto c = config_for(Subcommand::lambda_sweep, "h = 2^-7\n");
  bool pass = true;
  std::string detail;
  for (Rounding mode : {Rounding::nearest, Rounding::stochastic}) {
    std::vector<double> m;
    for (std::size_t i = 0; i < c.lambdas.size(); ++i) {
      const auto s = make_cell(c, 128, c.lambdas[i], mode, c.implementations.front(),
                               (std::uint64_t(10) << 40) | (std::uint64_t(i + 1) << 32));
      m.push_back(global_cell(s).inf.mean);
    }
    const double ratio = m.back() / m.front();
    pass = pass && ratio >= 10.0;
    detail += std::string(detail.empty() ? "" : "; ") + to_string(mode) + " " + fmt("%.4g", m.front()) +
              " -> " + fmt("%.4g", m.back()) + " (x" + fmt("%.1f", ratio) + ")";
  }
  return {pass, detail};
}

Verdict c11_dominance(const std::vector<std::pair<std::vector<SweepPoint>*, Rounding>>& sweeps) {
  bool ok = true;
  std::string note;
  int runs = 0;
  for (const auto& [pts, mode] : sweeps) {
    ok = dominated(*pts, mode, note) && ok;
    runs += static_cast<int>(pts->size());
  }
  // eigen-sums against their closed-form bounds for every configuration
  int sums = 0;
  for (const auto& [pts, mode] : sweeps)
    for (const auto& p : *pts) {
      const auto b = phi_bound_and_sums(p.spec.scheme, p.spec.grid.d(), p.spec.cfg.dt, p.spec.cfg.lambda,
                                        p.spec.grid.K());
      const bool fine = b.sums.inv_one_minus_abs <= b.phi && b.sums.inv_one_minus_abs_sq <= b.c_bar_sq &&
                        b.sums.weighted_ones <= b.c_tilde;
      if (!fine) note += " eigen-sum bound violated at K=" + std::to_string(p.spec.grid.K());
      ok = ok && fine;
      ++sums;
    }
  int lattice = 0;
  for (int d = 1; d <= 3; ++d)
    for (int K = 1; K <= 128; K *= 2) {
      const bool fine = lattice_sum(d, K, 2) <= inverse_square_bound(d, K) &&
                        lattice_sum(d, K, 4) <= inverse_fourth_bound(d);
      if (!fine) note += " lattice bound violated d=" + std::to_string(d) + " K=" + std::to_string(K);
      ok = ok && fine;
      ++lattice;
    }
  return {ok, std::to_string(runs) + " runs x 2 norms, " + std::to_string(sums) + " eigen-sum sets, " +
                  std::to_string(lattice) + " lattice sums" + note};
}

Verdict c12_ordering() {
  const auto c = config_for(Subcommand::local, "d = 2\nimplementations = delta:two_diff, delta:naive\n");
  bool pass = true;
  std::string detail;
  for (Rounding mode : {Rounding::nearest, Rounding::stochastic}) {
    std::vector<double> refined, naive, dts;
    for (std::size_t i = 0; i < c.K.size(); ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        const auto s = make_cell(c, c.K[i], c.lambda, mode, c.implementations[j],
                                 (std::uint64_t(12) << 40) | (std::uint64_t(2 * i + j + 1) << 32));
        const double theta = local_cell(s, c.local_samples).theta;
        (j == 0 ? refined : naive).push_back(theta);
        if (j == 0) dts.push_back(s.cfg.dt);
      }
    const bool order = refined.back() < naive.back();
    const double slope = std::log(refined[0] / refined[1]) / std::log(dts[0] / dts[1]);
    pass = pass && order && slope >= 0.4;
    detail += std::string(detail.empty() ? "" : "; ") + to_string(mode) + " refined " +
              fmt("%.4g", refined.back()) + " vs naive " + fmt("%.4g", naive.back()) +
              ", refined slope " + fmt("%.3f", slope);
  }
  return {pass, detail};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int n, const std::function<Verdict()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = body();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !v.pass;
    std::printf("C%d %s %s [%.1f s]\n", n, v.pass ? "PASS" : "FAIL", v.detail.c_str(), secs);
    std::fflush(stdout);
  };

  report(1, c1_unbiased);
  report(2, c2_roundoff);
  report(3, c3_exactness);
  report(4, c4_oracles);

  const auto one_d = config_for(Subcommand::global, "d = 1\nh = 2^-4, 2^-5, 2^-6, 2^-7\n");
  std::vector<SweepPoint> rtn1, sr1, sr2, sr3;
  report(5, [&] {
    rtn1 = global_sweep(one_d, Rounding::nearest, 5);
    return slope_in(rtn1, NormKind::inf, true, -1.35, -0.65);
  });
  report(6, [&] {
    sr1 = global_sweep(one_d, Rounding::stochastic, 6);
    return slope_in(sr1, NormKind::l2, false, -0.45, -0.05);
  });
  report(7, [&] {
    sr2 = global_sweep(config_for(Subcommand::global, "d = 2\nh = 2^-3, 2^-4, 2^-5\n"), Rounding::stochastic, 7);
    sr3 = global_sweep(config_for(Subcommand::global, "d = 3\nh = 2^-2, 2^-3, 2^-4\n"), Rounding::stochastic, 8);
    const Verdict a = slope_in(sr2, NormKind::l2, false, -0.25, 0.25);
    const Verdict b = slope_in(sr3, NormKind::l2, false, -0.25, 0.25);
    return Verdict{a.pass && b.pass, "2D " + a.detail + " | 3D " + b.detail};
  });
  report(8, c8_stagnation);
  report(9, [&] {
    if (sr1.empty()) return Verdict{false, "1D SR sweep unavailable"};
    return c9_floor(sr1.back());  // the h = 2^-7 mesh of the 1D SR sweep
  });
  report(10, c10_sweep);
  report(11, [&] {
    return c11_dominance({{&rtn1, Rounding::nearest}, {&sr1, Rounding::stochastic},
                          {&sr2, Rounding::stochastic}, {&sr3, Rounding::stochastic}});
  });
  report(12, c12_ordering);

  std::printf("%d of 12 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
