#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace srheat {

struct RatePoint {
  double dt = 0.0;
  double value = 0.0;
  /// Excluded from the fit (e.g. a run frozen at its initial condition).
  bool excluded = false;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  /// Root-mean-square residual of log(value).
  double residual = 0.0;
  std::size_t used = 0;
};

/// Least-squares slope of log(value) against log(dt) over the points that are
/// not excluded.
inline RateFit fit_rate(const std::vector<RatePoint>& points) {
  if (points.size() < 3) throw std::invalid_argument("rate fit needs at least 3 points");
  std::vector<double> x, y;
  for (const auto& p : points) {
    if (p.excluded) continue;
    if (!(p.dt > 0.0) || !(p.value > 0.0))
      throw std::invalid_argument("rate fit needs positive step sizes and values");
    x.push_back(std::log(p.dt));
    y.push_back(std::log(p.value));
  }
  if (x.size() < 2) throw std::invalid_argument("rate fit needs at least 2 usable points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 1e-24 * n) throw std::invalid_argument("rate fit abscissae are degenerate");
  RateFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss += r * r;
  }
  f.residual = std::sqrt(ss / n);
  f.used = x.size();
  return f;
}

}  // namespace srheat
