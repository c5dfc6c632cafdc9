#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace srheat {

/// A base-2 normalized floating-point format with gradual underflow.
///
/// `precision_bits` counts the implicit leading bit, so bfloat16 has t = 8.
/// Values of an emulated format are carried in IEEE binary64 (the carrier).
struct FloatFormat {
  int precision_bits = 53;
  int exponent_bits = 11;

  /// Largest t for which arithmetic on two representables followed by one
  /// rounding can be emulated from the carrier.
  static constexpr int kMaxEmulatedPrecision = 24;
  static constexpr int kMaxEmulatedExponentBits = 9;
  static constexpr int kCarrierPrecision = std::numeric_limits<double>::digits;

  static constexpr FloatFormat bfloat16() { return {8, 8}; }
  static constexpr FloatFormat fp16() { return {11, 5}; }
  static constexpr FloatFormat fp32() { return {24, 8}; }
  /// The carrier itself. Describes carrier vectors; never emulated.
  static constexpr FloatFormat fp64() { return {53, 11}; }

  constexpr int t() const { return precision_bits; }
  constexpr int e_max() const { return (1 << (exponent_bits - 1)) - 1; }
  constexpr int e_min() const { return 1 - e_max(); }

  /// Roundoff unit 2^-t.
  double unit() const { return std::ldexp(1.0, -precision_bits); }
  /// Smallest positive normal number 2^e_min.
  double x_min() const { return std::ldexp(1.0, e_min()); }
  /// Smallest positive subnormal number.
  double x_min_subnormal() const { return std::ldexp(1.0, e_min() - precision_bits + 1); }
  /// Largest finite number (2 - 2^(1-t)) 2^e_max.
  double x_max() const {
    return std::ldexp(2.0 - std::ldexp(1.0, 1 - precision_bits), e_max());
  }

  constexpr bool is_carrier() const { return precision_bits == 53 && exponent_bits == 11; }
  constexpr bool emulatable() const {
    return precision_bits >= 2 && precision_bits <= kMaxEmulatedPrecision &&
           exponent_bits >= 2 && exponent_bits <= kMaxEmulatedExponentBits;
  }

  std::string name() const {
    if (*this == bfloat16()) return "bfloat16";
    if (*this == fp16()) return "fp16";
    if (*this == fp32()) return "fp32";
    if (*this == fp64()) return "fp64";
    return "t" + std::to_string(precision_bits) + "e" + std::to_string(exponent_bits);
  }

  friend constexpr bool operator==(const FloatFormat&, const FloatFormat&) = default;
};

inline double unit(const FloatFormat& fmt) { return fmt.unit(); }

/// Throws std::invalid_argument unless `fmt` can be emulated over the carrier.
inline void require_emulatable(const FloatFormat& fmt) {
  if (fmt.precision_bits < 2 || fmt.exponent_bits < 2)
    throw std::invalid_argument("format needs t >= 2 and at least 2 exponent bits");
  if (fmt.precision_bits > FloatFormat::kMaxEmulatedPrecision)
    throw std::invalid_argument("precision t=" + std::to_string(fmt.precision_bits) +
                                " exceeds the emulation limit of " +
                                std::to_string(FloatFormat::kMaxEmulatedPrecision) + " bits");
  if (fmt.exponent_bits > FloatFormat::kMaxEmulatedExponentBits)
    throw std::invalid_argument("exponent_bits=" + std::to_string(fmt.exponent_bits) +
                                " exceeds the emulation limit of " +
                                std::to_string(FloatFormat::kMaxEmulatedExponentBits));
}

/// Parses "bfloat16", "fp16", "fp32", or an explicit format written either as
/// "t,exponent_bits" or in the "t10e5" spelling that name() produces.
inline FloatFormat parse_format(std::string_view text) {
  if (text == "bfloat16") return FloatFormat::bfloat16();
  if (text == "fp16") return FloatFormat::fp16();
  if (text == "fp32") return FloatFormat::fp32();
  if (text == "fp64") return FloatFormat::fp64();
  std::string_view body = text;
  char separator = ',';
  if (body.find(',') == std::string_view::npos && body.size() > 1 && body.front() == 't') {
    body.remove_prefix(1);
    separator = 'e';
  }
  const auto split = body.find(separator);
  if (split == std::string_view::npos)
    throw std::invalid_argument("unknown format '" + std::string(text) + "'");
  auto to_int = [&](std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
      throw std::invalid_argument("bad format '" + std::string(text) + "'");
    return v;
  };
  FloatFormat fmt{to_int(body.substr(0, split)), to_int(body.substr(split + 1))};
  require_emulatable(fmt);
  return fmt;
}

}  // namespace srheat
