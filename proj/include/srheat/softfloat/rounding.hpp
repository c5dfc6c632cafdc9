#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "srheat/softfloat/format.hpp"
#include "srheat/softfloat/rng.hpp"

namespace srheat {

/// Rounding applied after each emulated operation. `carrier` performs no
/// emulated rounding at all and serves as the exact-arithmetic proxy.
enum class Rounding { carrier, nearest, stochastic };

inline const char* to_string(Rounding mode) {
  switch (mode) {
    case Rounding::carrier: return "carrier";
    case Rounding::nearest: return "rtn";
    case Rounding::stochastic: return "sr";
  }
  return "?";
}

inline Rounding parse_rounding(std::string_view text) {
  if (text == "rtn" || text == "RtN" || text == "nearest") return Rounding::nearest;
  if (text == "sr" || text == "SR" || text == "stochastic") return Rounding::stochastic;
  if (text == "carrier" || text == "exact" || text == "fp64") return Rounding::carrier;
  throw std::invalid_argument("unknown rounding mode '" + std::string(text) + "'");
}

/// Raised when a value lies outside the finite range of a format.
class RangeError : public std::range_error {
 public:
  RangeError(const std::string& what, int direction)
      : std::range_error(what), direction_(direction) {}
  /// +1 for overflow past +x_max, -1 past -x_max.
  int direction() const { return direction_; }

 private:
  int direction_;
};

/// Raised for NaN operands.
class InvalidOperand : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Relative roundoff of one rounding: rounded = exact * (1 + delta).
struct RoundingEvent {
  double delta = 0.0;
  Rounding mode = Rounding::nearest;
  double absolute_error = 0.0;
  /// The exact result lay beyond x_max and the rounded value is an infinity.
  bool overflow = false;
};

/// A carrier value known to be representable in `format` (or an infinity
/// produced by overflow).
struct Rounded {
  double value = 0.0;
  FloatFormat format = FloatFormat::bfloat16();
};

enum class Op { add, sub, mul, div };

namespace detail {

/// Unbiased binary exponent of a nonzero, finite, normal carrier value.
inline int exponent_of(double x) {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  return static_cast<int>((bits >> 52) & 0x7ff) - 1023;
}

inline double pow2(int e) { return std::bit_cast<double>(static_cast<std::uint64_t>(e + 1023) << 52); }

/// Spacing of `fmt` around |x|, treating the exponent range as unbounded
/// above so that overflow can be detected after rounding.
inline double quantum(const FloatFormat& fmt, double x) {
  const int e = std::max(exponent_of(x), fmt.e_min());
  return pow2(e - fmt.precision_bits + 1);
}

/// Position of x between its lower neighbour a = floor(x/q) q and a + q.
struct Bracket {
  double q;      // spacing
  double floor;  // a / q (an integer)
  double frac;   // (x - a) / q in [0, 1), exact
};

inline Bracket bracket(const FloatFormat& fmt, double x) {
  const double q = quantum(fmt, x);
  const double m = x * (1.0 / q);
  const double f = std::floor(m);
  return {q, f, m - f};
}

inline double two_sum_error(double a, double b, double s) {
  const double bb = s - a;
  return (a - (s - bb)) + (b - bb);
}

/// Gap from |hi| to the next representable in the direction of `toward`
/// (same sign as hi: magnitude grows; opposite: magnitude shrinks).
inline double gap_from_representable(const FloatFormat& fmt, double hi, double toward) {
  const double q = quantum(fmt, hi);
  const bool shrinking = (toward > 0) != (hi > 0);
  if (!shrinking) return q;
  const int e = exponent_of(hi);
  const bool binade_bottom = std::fabs(hi) == pow2(e);
  return (binade_bottom && e > fmt.e_min()) ? q * 0.5 : q;
}

/// Rounds the exact value hi + lo (hi = carrier rounding, |lo| <= ulp(hi)/2)
/// to `fmt` once. Returns +-inf past x_max.
inline double round_exact(const FloatFormat& fmt, Rounding mode, double hi, double lo,
                          RngStream* rng) {
  if (hi == 0.0 || !std::isfinite(hi)) return hi;
  const Bracket br = bracket(fmt, hi);
  double r;
  if (br.frac == 0.0) {
    r = hi;
    if (lo != 0.0 && mode == Rounding::stochastic) {
      const double gap = gap_from_representable(fmt, hi, lo);
      if (rng->uniform53() < std::fabs(lo) / gap) r = hi + std::copysign(gap, lo);
    }
  } else {
    bool up;
    if (mode == Rounding::stochastic) {
      up = rng->uniform53() < br.frac + lo / br.q;
    } else if (br.frac != 0.5) {
      up = br.frac > 0.5;
    } else if (lo != 0.0) {
      up = lo > 0.0;
    } else {
      up = std::fmod(br.floor, 2.0) != 0.0;
    }
    r = (up ? br.floor + 1.0 : br.floor) * br.q;
  }
  if (std::fabs(r) > fmt.x_max()) return std::copysign(INFINITY, r);
  return r;
}

inline double relative_delta(double rounded, double hi, double lo) {
  if (hi == 0.0) return 0.0;
  return ((rounded - hi) - lo) / (hi + lo);
}

}  // namespace detail

inline bool is_representable(double x, const FloatFormat& fmt) {
  if (x == 0.0) return true;
  if (!std::isfinite(x) || std::fabs(x) > fmt.x_max()) return false;
  if (fmt.is_carrier()) return true;
  return detail::bracket(fmt, x).frac == 0.0;
}

/// Adjacent representables a <= x <= b (a == b == x when x is representable).
inline std::pair<double, double> neighbors(double x, const FloatFormat& fmt) {
  if (std::isnan(x)) throw InvalidOperand("neighbors of NaN");
  if (!(std::fabs(x) <= fmt.x_max()))
    throw RangeError("value outside the range of " + fmt.name() +
                         (x > 0 ? " (overflow past +x_max)" : " (overflow past -x_max)"),
                     x > 0 ? 1 : -1);
  if (x == 0.0) return {x, x};
  const auto br = detail::bracket(fmt, x);
  const double a = br.floor * br.q;
  if (br.frac == 0.0) return {a, a};
  return {a, (br.floor + 1.0) * br.q};
}

inline Rounded round_rtn(double x, const FloatFormat& fmt) {
  if (std::isnan(x)) throw InvalidOperand("round_rtn of NaN");
  return {detail::round_exact(fmt, Rounding::nearest, x, 0.0, nullptr), fmt};
}

inline Rounded round_sr(double x, const FloatFormat& fmt, RngStream& rng) {
  if (std::isnan(x)) throw InvalidOperand("round_sr of NaN");
  return {detail::round_exact(fmt, Rounding::stochastic, x, 0.0, &rng), fmt};
}

/// Emulated arithmetic over carrier values that are representable in the
/// working format. Every operation computes the exact result (as an
/// unevaluated carrier pair) and rounds it once.
///
/// In carrier mode the operations are plain binary64 arithmetic.
class Arithmetic {
 public:
  Arithmetic() = default;
  Arithmetic(FloatFormat fmt, Rounding mode, RngStream* rng = nullptr)
      : fmt_(fmt), mode_(mode), rng_(rng) {
    if (mode_ != Rounding::carrier) require_emulatable(fmt_);
    if (mode_ == Rounding::stochastic && rng_ == nullptr)
      throw std::invalid_argument("stochastic rounding needs a random stream");
    if (mode_ == Rounding::carrier) fmt_ = FloatFormat::fp64();
  }

  const FloatFormat& format() const { return fmt_; }
  Rounding mode() const { return mode_; }
  bool exact() const { return mode_ == Rounding::carrier; }
  RngStream* rng() const { return rng_; }
  void set_rng(RngStream* rng) { rng_ = rng; }

  /// Every rounding performed while a sink is attached is appended to it.
  void record_events(std::vector<RoundingEvent>* sink) { events_ = sink; }

  double add(double a, double b) {
    const double s = a + b;
    if (exact()) return s;
    return finish(s, std::isfinite(s) ? detail::two_sum_error(a, b, s) : 0.0);
  }
  double sub(double a, double b) { return add(a, -b); }
  double mul(double a, double b) {
    const double p = a * b;
    if (exact()) return p;
    return finish(p, std::isfinite(p) ? std::fma(a, b, -p) : 0.0);
  }
  double div(double a, double b) {
    if (b == 0.0) throw std::domain_error("division by zero");
    const double q = a / b;
    if (exact()) return q;
    return finish(q, std::isfinite(q) && q != 0.0 ? std::fma(-q, b, a) / b : 0.0);
  }
  /// Multiplies by a carrier-held constant with one rounding.
  double scale(double x, double c) { return mul(x, c); }
  /// Rounds a carrier value into the working format.
  double round(double x) {
    if (exact()) return x;
    return finish(x, 0.0);
  }

  double apply(Op op, double a, double b) {
    switch (op) {
      case Op::add: return add(a, b);
      case Op::sub: return sub(a, b);
      case Op::mul: return mul(a, b);
      case Op::div: return div(a, b);
    }
    return 0.0;
  }

 private:
  double finish(double hi, double lo) {
    if (std::isnan(hi)) throw InvalidOperand("NaN produced by emulated operation");
    const double r = detail::round_exact(fmt_, mode_, hi, lo, rng_);
    if (events_ != nullptr)
      events_->push_back({detail::relative_delta(r, hi, lo), mode_, std::fabs((r - hi) - lo),
                          std::isinf(r)});
    return r;
  }

  FloatFormat fmt_ = FloatFormat::fp64();
  Rounding mode_ = Rounding::carrier;
  RngStream* rng_ = nullptr;
  std::vector<RoundingEvent>* events_ = nullptr;
};

/// One emulated operation on two representables of a shared format.
/// `rng` is only consulted for stochastic rounding.
inline std::pair<Rounded, RoundingEvent> rounded_op(const Rounded& a, const Rounded& b, Op op,
                                                    Rounding mode, RngStream* rng = nullptr) {
  if (!(a.format == b.format)) throw std::invalid_argument("operands use different formats");
  if (std::isnan(a.value) || std::isnan(b.value)) throw InvalidOperand("NaN operand");
  std::vector<RoundingEvent> events;
  Arithmetic arith(a.format, mode, rng);
  arith.record_events(&events);
  const double r = arith.apply(op, a.value, b.value);
  RoundingEvent ev = events.empty() ? RoundingEvent{0.0, mode, 0.0, false} : events.front();
  return {{r, a.format}, ev};
}

/// Left-to-right recursive summation; each partial sum is rounded once.
inline std::pair<Rounded, std::vector<RoundingEvent>> rounded_sum(std::span<const Rounded> v,
                                                                  Rounding mode,
                                                                  RngStream* rng = nullptr) {
  if (v.empty()) throw std::invalid_argument("rounded_sum of an empty sequence");
  std::vector<RoundingEvent> events;
  Arithmetic arith(v.front().format, mode, rng);
  arith.record_events(&events);
  double acc = v.front().value;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i].format == v.front().format))
      throw std::invalid_argument("summands use different formats");
    acc = arith.add(acc, v[i].value);
  }
  return {{acc, v.front().format}, std::move(events)};
}

}  // namespace srheat
