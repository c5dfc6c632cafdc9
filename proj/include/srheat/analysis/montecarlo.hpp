#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace srheat {

/// Worker count: SRHEATLAB_THREADS when set to a positive integer, otherwise
/// the hardware concurrency.
inline unsigned worker_count() {
  if (const char* env = std::getenv("SRHEATLAB_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls fn(i) for i in [0, count) on up to `workers` threads. The first
/// exception thrown by any task is rethrown after all workers finish.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn,
                         unsigned workers = worker_count()) {
  workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Pairwise (cascade) summation.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

struct MCEstimate {
  double mean = 0.0;
  std::size_t samples = 0;
  double half_width = 0.0;
  double confidence = 0.95;
  double ci_low = 0.0;
  double ci_high = 0.0;
  /// False when the sample cap was hit before the interval was tight enough.
  bool converged = true;
};

/// How samples map to the estimated quantity.
///   mean: E[X]
///   root_mean_square: E[X^2]^{1/2}, the interval transformed through the root.
enum class Estimator { mean, root_mean_square };

struct MCOptions {
  double relative_half_width = 0.05;
  /// Two-sided 95% normal quantile.
  double z = 1.959963984540054;
  double confidence = 0.95;
  std::size_t min_samples = 10;
  std::size_t max_samples = 1000;
  /// Samples are computed in batches of this size; the stopping rule is then
  /// scanned sample by sample, so results do not depend on the thread count.
  std::size_t batch = 8;
  unsigned workers = 0;  // 0: worker_count()
};

namespace detail {

inline MCEstimate estimate_from(std::span<const double> x, Estimator kind, const MCOptions& opt) {
  std::vector<double> v(x.begin(), x.end());
  if (kind == Estimator::root_mean_square)
    for (double& s : v) s *= s;
  const double n = static_cast<double>(v.size());
  const double mean = pairwise_sum(v) / n;
  std::vector<double> dev(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) dev[i] = (v[i] - mean) * (v[i] - mean);
  const double var = v.size() > 1 ? pairwise_sum(dev) / (n - 1.0) : 0.0;
  const double hw = opt.z * std::sqrt(var / n);
  MCEstimate e;
  e.samples = v.size();
  e.confidence = opt.confidence;
  if (kind == Estimator::mean) {
    e.mean = mean;
    e.ci_low = mean - hw;
    e.ci_high = mean + hw;
  } else {
    e.mean = std::sqrt(mean);
    e.ci_low = std::sqrt(std::max(0.0, mean - hw));
    e.ci_high = std::sqrt(mean + hw);
  }
  e.half_width = 0.5 * (e.ci_high - e.ci_low);
  return e;
}

inline bool tight(const MCEstimate& e, const MCOptions& opt) {
  return e.half_width <= opt.relative_half_width * std::fabs(e.mean);
}

}  // namespace detail

struct MCResult {
  std::vector<MCEstimate> estimates;
  /// samples[i][q]: quantity q of sample i, for the samples used.
  std::vector<std::vector<double>> samples;
};

/// Estimates several quantities from shared samples. `sample(i)` must be a
/// deterministic function of the sample index (it should seed its random
/// stream from i). Sampling stops at the first sample count >= min_samples
/// at which every quantity's confidence interval is within the relative
/// half-width, or at the cap (estimates then flagged non-converged).
/// A deterministic recipe is evaluated once and returned with zero width.
inline MCResult mc_expectation(const std::function<std::vector<double>(std::size_t)>& sample,
                               std::span<const Estimator> kinds, bool deterministic,
                               const MCOptions& opt = {}) {
  MCResult res;
  const std::size_t q = kinds.size();
  if (deterministic) {
    auto v = sample(0);
    if (v.size() != q) throw std::invalid_argument("sample size does not match estimator count");
    for (std::size_t j = 0; j < q; ++j) {
      MCEstimate e;
      e.mean = e.ci_low = e.ci_high = v[j];
      e.samples = 1;
      e.confidence = opt.confidence;
      res.estimates.push_back(e);
    }
    res.samples.push_back(std::move(v));
    return res;
  }
  if (opt.min_samples < 2 || opt.max_samples < opt.min_samples || opt.batch == 0)
    throw std::invalid_argument("invalid Monte Carlo options");
  const unsigned workers = opt.workers > 0 ? opt.workers : worker_count();
  std::vector<std::vector<double>> all;
  std::size_t checked = 0;
  for (;;) {
    const std::size_t start = all.size();
    const std::size_t count = std::min(opt.batch, opt.max_samples - start);
    all.resize(start + count);
    parallel_for(
        count, [&](std::size_t i) { all[start + i] = sample(start + i); }, workers);
    for (std::size_t i = start; i < all.size(); ++i)
      if (all[i].size() != q) throw std::invalid_argument("sample size does not match estimator count");
    for (std::size_t n = std::max(checked + 1, opt.min_samples); n <= all.size(); ++n) {
      checked = n;
      std::vector<MCEstimate> est;
      bool ok = true;
      for (std::size_t j = 0; j < q; ++j) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = all[i][j];
        est.push_back(detail::estimate_from(col, kinds[j], opt));
        ok = ok && detail::tight(est.back(), opt);
      }
      if (ok || n == opt.max_samples) {
        for (auto& e : est) e.converged = ok;
        res.estimates = std::move(est);
        all.resize(n);
        res.samples = std::move(all);
        return res;
      }
    }
  }
}

/// Single-quantity convenience form.
inline MCEstimate mc_expectation(const std::function<double(std::size_t)>& sample,
                                 Estimator kind, bool deterministic, const MCOptions& opt = {}) {
  const Estimator kinds[] = {kind};
  return mc_expectation([&](std::size_t i) { return std::vector<double>{sample(i)}; }, kinds,
                        deterministic, opt)
      .estimates.front();
}

}  // namespace srheat
