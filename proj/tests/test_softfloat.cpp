#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "srheat/softfloat/format.hpp"
#include "srheat/softfloat/rng.hpp"
#include "srheat/softfloat/rounding.hpp"

using namespace srheat;

namespace {

const oracle::Table& bf16_table() {
  static const oracle::Table t(oracle::enumerate_format(8, 8));
  return t;
}
const oracle::Table& fp16_table() {
  static const oracle::Table t(oracle::enumerate_format(11, 5));
  return t;
}

}  // namespace

TEST(Format, UnitRoundoffOfPresets) {
  EXPECT_EQ(FloatFormat::bfloat16().unit(), std::ldexp(1.0, -8));
  EXPECT_EQ(FloatFormat::fp16().unit(), std::ldexp(1.0, -11));
  EXPECT_EQ(FloatFormat::fp32().unit(), std::ldexp(1.0, -24));
  EXPECT_NEAR(FloatFormat::bfloat16().unit(), 3.91e-3, 0.005e-3);
  EXPECT_NEAR(FloatFormat::fp16().unit(), 4.88e-4, 0.005e-4);
  EXPECT_NEAR(FloatFormat::fp32().unit(), 5.96e-8, 0.005e-8);
}

TEST(Format, RangeMatchesBitPatterns) {
  const auto& bf = bf16_table().values;
  EXPECT_EQ(FloatFormat::bfloat16().x_max(), bf.back());
  EXPECT_EQ(FloatFormat::bfloat16().x_min_subnormal(), bf[1]);
  const auto& h = fp16_table().values;
  EXPECT_EQ(FloatFormat::fp16().x_max(), 65504.0);
  EXPECT_EQ(FloatFormat::fp16().x_max(), h.back());
  EXPECT_EQ(FloatFormat::fp16().x_min(), std::ldexp(1.0, -14));
}

TEST(Format, ParseAndValidate) {
  EXPECT_EQ(parse_format("bfloat16"), FloatFormat::bfloat16());
  EXPECT_EQ(parse_format("fp16"), FloatFormat::fp16());
  EXPECT_EQ(parse_format("10, 6"), (FloatFormat{10, 6}));
  EXPECT_EQ(parse_format("t10e6"), (FloatFormat{10, 6}));
  EXPECT_EQ((FloatFormat{10, 6}).name(), "t10e6");
  EXPECT_EQ(parse_format((FloatFormat{12, 7}).name()), (FloatFormat{12, 7}));
  EXPECT_THROW(parse_format("t10"), std::invalid_argument);
  EXPECT_THROW(parse_format("fp8"), std::invalid_argument);
  EXPECT_THROW(parse_format("30,8"), std::invalid_argument);
  EXPECT_THROW(parse_format("1,8"), std::invalid_argument);
}

TEST(Format, BitOracleAgreesWithFloatTruncation) {
  EXPECT_EQ(bf16_table().values, oracle::enumerate_bfloat16_via_float());
}

TEST(Neighbors, Examples) {
  const auto bf = FloatFormat::bfloat16();
  EXPECT_EQ(neighbors(1.0, bf), std::make_pair(1.0, 1.0));
  // spacing above 1 is 2^-7 for an 8-bit significand
  const double x = 1.0 + std::ldexp(1.0, -10);
  EXPECT_EQ(neighbors(x, bf), bf16_table().neighbors(x));
  EXPECT_EQ(neighbors(x, bf), std::make_pair(1.0, 1.0 + std::ldexp(1.0, -7)));
  EXPECT_EQ(neighbors(0.3, bf), std::make_pair(0.298828125, 0.30078125));
  EXPECT_EQ(neighbors(0.3, bf), bf16_table().neighbors(0.3));
}

TEST(Neighbors, MatchBitOracleOnRandomValues) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> mant(1.0, 2.0), expo(-140.0, 127.0);
  for (const auto& [fmt, tab] : {std::pair{FloatFormat::bfloat16(), &bf16_table()},
                                 std::pair{FloatFormat::fp16(), &fp16_table()}}) {
    const double top = fmt.x_max();
    for (int i = 0; i < 20000; ++i) {
      double x = std::ldexp(mant(gen), static_cast<int>(expo(gen)));
      if (fmt == FloatFormat::fp16()) x = std::ldexp(mant(gen), static_cast<int>(expo(gen) / 5.0));
      if (x > top) continue;
      if (i % 2) x = -x;
      ASSERT_EQ(neighbors(x, fmt), tab->neighbors(x)) << fmt.name() << " x=" << x;
    }
  }
}

TEST(Neighbors, OverflowAndNaN) {
  const auto bf = FloatFormat::bfloat16();
  EXPECT_THROW(neighbors(1e39, bf), RangeError);
  EXPECT_THROW(neighbors(-1e39, bf), RangeError);
  EXPECT_THROW(neighbors(std::nan(""), bf), InvalidOperand);
}

TEST(RoundNearest, Examples) {
  const auto bf = FloatFormat::bfloat16();
  EXPECT_EQ(round_rtn(0.3, bf).value, 0.30078125);
  // below the midpoint 1 + 2^-8
  EXPECT_EQ(round_rtn(1.0 + std::ldexp(1.0, -9), bf).value, 1.0);
  // exact ties go to the even significand
  EXPECT_EQ(round_rtn(1.0 + std::ldexp(1.0, -8), bf).value, 1.0);
  EXPECT_EQ(round_rtn(1.0 + 3 * std::ldexp(1.0, -8), bf).value, 1.0 + std::ldexp(1.0, -6));
  for (double x : bf16_table().values) ASSERT_EQ(round_rtn(x, bf).value, x);
}

TEST(RoundNearest, MatchesBitOracle) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> mant(1.0, 2.0);
  std::uniform_int_distribution<int> ex(-135, 126), ex16(-25, 14);
  for (int i = 0; i < 50000; ++i) {
    const double x = std::ldexp(mant(gen), ex(gen));
    ASSERT_EQ(round_rtn(x, FloatFormat::bfloat16()).value, bf16_table().nearest(x)) << x;
    const double y = -std::ldexp(mant(gen), ex16(gen));
    ASSERT_EQ(round_rtn(y, FloatFormat::fp16()).value, fp16_table().nearest(y)) << y;
  }
  // every midpoint is a tie
  const auto& v = bf16_table().values;
  for (std::size_t i = 1; i + 1 < v.size(); i += 97) {
    const double mid = 0.5 * (v[i] + v[i + 1]);
    ASSERT_EQ(round_rtn(mid, FloatFormat::bfloat16()).value, bf16_table().nearest(mid));
  }
}

TEST(RoundStochastic, RepresentableIsFixed) {
  RngStream rng(1, 2);
  for (double x : {0.0, 1.0, -0.30078125, 3.0, std::ldexp(1.0, -133)})
    for (int i = 0; i < 100; ++i) ASSERT_EQ(round_sr(x, FloatFormat::bfloat16(), rng).value, x);
}

TEST(RoundStochastic, UpProbabilityOfOnePlusTwoToMinusTen) {
  // neighbours 1 and 1 + 2^-7; distance to 1 is 1/8 of the gap
  const auto bf = FloatFormat::bfloat16();
  const double x = 1.0 + std::ldexp(1.0, -10), up = 1.0 + std::ldexp(1.0, -7);
  RngStream rng(3, 0);
  const int n = 200000;
  int ups = 0;
  for (int i = 0; i < n; ++i) {
    const double r = round_sr(x, bf, rng).value;
    ASSERT_TRUE(r == 1.0 || r == up);
    ups += r == up;
  }
  const double p = 0.125, sd = std::sqrt(p * (1 - p) / n);
  EXPECT_NEAR(double(ups) / n, p, 5 * sd);
}

TEST(RoundStochastic, EmpiricalMeanIsUnbiased) {
  const auto fp = FloatFormat::fp16();
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> U(0.1, 100.0);
  for (int k = 0; k < 20; ++k) {
    const double x = U(gen);
    const auto [a, b] = fp16_table().neighbors(x);
    RngStream rng(9, k);
    const int n = 20000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += round_sr(x, fp, rng).value - x;
    const double rho = (x - a) / (b - a);
    const double sd = (b - a) * std::sqrt(rho * (1 - rho) / n);
    EXPECT_NEAR(sum / n, 0.0, 5 * sd + 1e-300) << x;
  }
}

TEST(Arithmetic, Examples) {
  const auto bf = FloatFormat::bfloat16();
  const auto one = Rounded{1.0, bf};
  auto [two, ev] = rounded_op(one, one, Op::add, Rounding::nearest);
  EXPECT_EQ(two.value, 2.0);
  EXPECT_EQ(ev.delta, 0.0);
  const double small = std::ldexp(1.0, -9);
  auto [r, ev2] = rounded_op(one, Rounded{small, bf}, Op::add, Rounding::nearest);
  EXPECT_EQ(r.value, 1.0);
  EXPECT_DOUBLE_EQ(ev2.delta, -small / (1.0 + small));
  EXPECT_THROW(rounded_op(one, Rounded{1.0, FloatFormat::fp16()}, Op::add, Rounding::nearest),
               std::invalid_argument);
  EXPECT_THROW(rounded_op(one, Rounded{0.0, bf}, Op::div, Rounding::nearest), std::domain_error);
  auto [inf, ev3] = rounded_op(Rounded{bf.x_max(), bf}, Rounded{bf.x_max(), bf}, Op::add, Rounding::nearest);
  EXPECT_TRUE(std::isinf(inf.value) && inf.value > 0);
  EXPECT_TRUE(ev3.overflow);
  EXPECT_FALSE(ev2.overflow);
}

TEST(Arithmetic, ResultsMatchBitOracleOfExactValue) {
  const auto bf = FloatFormat::bfloat16();
  std::mt19937_64 gen(13);
  std::uniform_real_distribution<double> mant(-2.0, 2.0);
  std::uniform_int_distribution<int> ex(-20, 20);
  Arithmetic arith(bf, Rounding::nearest);
  for (int i = 0; i < 20000; ++i) {
    const double a = bf16_table().nearest(std::ldexp(mant(gen), ex(gen)));
    const double b = bf16_table().nearest(std::ldexp(mant(gen), ex(gen)));
    // products and sums of 8-bit significands are exact in binary64
    ASSERT_EQ(arith.add(a, b), bf16_table().nearest(a + b));
    ASSERT_EQ(arith.mul(a, b), bf16_table().nearest(a * b));
    if (b != 0.0) {
      const double q = arith.div(a, b);
      const auto [lo, hi] = bf16_table().neighbors(a / b);
      ASSERT_TRUE(q == lo || q == hi);
      // the quotient is rounded from the exact value, not from a/b
      const double e_q = std::fabs(q * b - a), e_other = std::fabs((q == lo ? hi : lo) * b - a);
      ASSERT_LE(e_q, e_other);
    }
  }
}

TEST(Arithmetic, RoundingUsesTheExactSumBeyondTheCarrier) {
  // 1 + 2^-60 collapses to 1 in binary64; the recorded error must not
  const FloatFormat fp32 = FloatFormat::fp32();
  std::vector<RoundingEvent> ev;
  Arithmetic arith(fp32, Rounding::nearest);
  arith.record_events(&ev);
  const double tiny = std::ldexp(1.0, -60);
  EXPECT_EQ(arith.add(1.0, tiny), 1.0);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_DOUBLE_EQ(ev[0].delta, -tiny / (1.0 + tiny));
  EXPECT_DOUBLE_EQ(ev[0].absolute_error, tiny);
}

TEST(Arithmetic, RelativeErrorBound) {
  for (auto fmt : {FloatFormat::bfloat16(), FloatFormat::fp16()}) {
    const auto& tab = fmt == FloatFormat::bfloat16() ? bf16_table() : fp16_table();
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> mant(-2.0, 2.0);
    std::uniform_int_distribution<int> ex(-4, 4);
    RngStream rng(4, 4);
    std::vector<RoundingEvent> ev;
    Arithmetic rtn(fmt, Rounding::nearest), sr(fmt, Rounding::stochastic, &rng);
    rtn.record_events(&ev);
    sr.record_events(&ev);
    const double u = fmt.unit();
    for (int i = 0; i < 20000; ++i) {
      const double a = tab.nearest(std::ldexp(mant(gen), ex(gen)));
      const double b = tab.nearest(std::ldexp(mant(gen), ex(gen)));
      // the bounds hold in the normal range only
      for (double exact : {a + b, a * b}) {
        if (exact != 0.0 && std::fabs(exact) < fmt.x_min()) continue;
        const bool sum = exact == a + b;
        ev.clear();
        sum ? rtn.add(a, b) : rtn.mul(a, b);
        ASSERT_LE(std::fabs(ev.at(0).delta), u / (1 + u));
        ev.clear();
        sum ? sr.add(a, b) : sr.mul(a, b);
        ASSERT_LT(std::fabs(ev.at(0).delta), 2 * u);
      }
    }
  }
}

TEST(Arithmetic, CarrierModeIsPlainDouble) {
  Arithmetic exact;
  EXPECT_TRUE(exact.exact());
  EXPECT_EQ(exact.add(0.1, 0.2), 0.1 + 0.2);
  EXPECT_EQ(exact.mul(0.1, 3.0), 0.1 * 3.0);
  EXPECT_THROW(Arithmetic(FloatFormat::bfloat16(), Rounding::stochastic, nullptr), std::invalid_argument);
}

TEST(RoundedSum, Examples) {
  const auto bf = FloatFormat::bfloat16();
  std::vector<Rounded> one{{0.75, bf}};
  auto [s1, e1] = rounded_sum(one, Rounding::nearest);
  EXPECT_EQ(s1.value, 0.75);
  EXPECT_TRUE(e1.empty());
  std::vector<Rounded> ones(3, Rounded{1.0, bf});
  auto [s3, e3] = rounded_sum(ones, Rounding::nearest);
  EXPECT_EQ(s3.value, 3.0);
  for (const auto& e : e3) EXPECT_EQ(e.delta, 0.0);
  const double t = std::ldexp(1.0, -9);
  std::vector<Rounded> stag{{1.0, bf}, {t, bf}, {t, bf}};
  auto [s, e] = rounded_sum(stag, Rounding::nearest);
  EXPECT_EQ(s.value, 1.0);
  ASSERT_EQ(e.size(), 2u);
  EXPECT_LT(e[0].delta, 0.0);
  EXPECT_LT(e[1].delta, 0.0);
  EXPECT_THROW(rounded_sum(std::vector<Rounded>{}, Rounding::nearest), std::invalid_argument);
}

TEST(Philox, KnownAnswerVectors) {
  using A4 = std::array<std::uint32_t, 4>;
  EXPECT_EQ(philox4x32_10({0, 0, 0, 0}, {0, 0}), (A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
            (A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(RngStream, ReproducibleAndIndependent) {
  RngStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next_u64();
    ASSERT_EQ(x, b.next_u64());
    seen.insert(x);
    seen.insert(c.next_u64());
    seen.insert(d.next_u64());
  }
  EXPECT_EQ(seen.size(), 3000u);
  EXPECT_EQ(a.position(), 1000u);
  RngStream e(1, 1);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double v = e.uniform53();
    ASSERT_GE(v, 0.0);
    ASSERT_LT(v, 1.0);
    sum += v;
  }
  EXPECT_NEAR(sum / 100000, 0.5, 5 * std::sqrt(1.0 / 12 / 100000));
  EXPECT_NE(e.substream(0).stream_id(), e.substream(1).stream_id());
}
