#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace srheat {

/// Dense real polynomial, coefficient i multiplying z^i.
class Polynomial {
 public:
  Polynomial() = default;
  Polynomial(std::initializer_list<double> c) : c_(c) { trim(); }
  explicit Polynomial(std::vector<double> c) : c_(std::move(c)) { trim(); }

  const std::vector<double>& coeffs() const { return c_; }
  int degree() const { return c_.empty() ? -1 : static_cast<int>(c_.size()) - 1; }
  double coeff(int i) const { return i >= 0 && i < static_cast<int>(c_.size()) ? c_[i] : 0.0; }
  bool is_zero() const { return c_.empty(); }

  double operator()(double z) const {
    double acc = 0.0;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * z + *it;
    return acc;
  }

  friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    std::vector<double> c(std::max(a.c_.size(), b.c_.size()), 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = a.coeff(int(i)) + b.coeff(int(i));
    return Polynomial(std::move(c));
  }
  friend Polynomial operator-(const Polynomial& a, const Polynomial& b) { return a + b * -1.0; }
  friend Polynomial operator*(const Polynomial& a, double s) {
    std::vector<double> c(a.c_);
    for (double& x : c) x *= s;
    return Polynomial(std::move(c));
  }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    if (a.is_zero() || b.is_zero()) return {};
    std::vector<double> c(a.c_.size() + b.c_.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.c_.size(); ++i)
      for (std::size_t j = 0; j < b.c_.size(); ++j) c[i + j] += a.c_[i] * b.c_[j];
    return Polynomial(std::move(c));
  }

  /// Coefficientwise comparison with absolute tolerance.
  bool approx_equal(const Polynomial& other, double tol = 1e-13) const {
    const int n = std::max(degree(), other.degree());
    for (int i = 0; i <= n; ++i)
      if (std::fabs(coeff(i) - other.coeff(i)) > tol) return false;
    return true;
  }

 private:
  void trim() {
    while (!c_.empty() && c_.back() == 0.0) c_.pop_back();
  }
  std::vector<double> c_;
};

struct ButcherTableau {
  std::vector<std::vector<double>> A;
  std::vector<double> b;
  std::vector<double> c;
};

namespace detail {

using PolyMatrix = std::vector<std::vector<Polynomial>>;

inline PolyMatrix minor_of(const PolyMatrix& m, std::size_t row, std::size_t col) {
  PolyMatrix out;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (i == row) continue;
    std::vector<Polynomial> r;
    for (std::size_t j = 0; j < m.size(); ++j)
      if (j != col) r.push_back(m[i][j]);
    out.push_back(std::move(r));
  }
  return out;
}

/// Laplace expansion; stage counts here are tiny.
inline Polynomial determinant(const PolyMatrix& m) {
  if (m.empty()) return Polynomial{1.0};
  if (m.size() == 1) return m[0][0];
  Polynomial det;
  for (std::size_t j = 0; j < m.size(); ++j) {
    if (m[0][j].is_zero()) continue;
    const double sign = (j % 2 == 0) ? 1.0 : -1.0;
    det = det + m[0][j] * determinant(minor_of(m, 0, j)) * sign;
  }
  return det;
}

/// I - z A with polynomial entries.
inline PolyMatrix identity_minus_zA(const ButcherTableau& t) {
  const std::size_t s = t.b.size();
  PolyMatrix m(s, std::vector<Polynomial>(s));
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < s; ++j)
      m[i][j] = Polynomial{i == j ? 1.0 : 0.0, -t.A[i][j]};
  return m;
}

}  // namespace detail

/// A Runge-Kutta method reduced to its action on y' = -A y + f:
///   S(z) = N(z)/W(z) = 1 + z S~(z),  S~(z) = sum_j Q_j(z),
/// all sharing the denominator W(z) = det(I - z A_butcher).
struct RKScheme {
  std::string name;
  int stages = 0;
  std::vector<double> nodes;
  bool implicit = false;
  ButcherTableau tableau;
  Polynomial numerator;        // N
  Polynomial denominator;      // W
  Polynomial tilde_numerator;  // S~ = tilde_numerator / W
  std::vector<Polynomial> q_numerators;

  double S(double z) const { return numerator(z) / denominator(z); }
  double S_tilde(double z) const { return tilde_numerator(z) / denominator(z); }
  double Q(int j, double z) const { return q_numerators.at(j)(z) / denominator(z); }
};

/// Derives the stability function and forcing weights of a tableau:
/// Q_j(z) = (b^T (I - zA)^{-1})_j and S(z) = det(I - zA + z 1 b^T) / det(I - zA).
inline RKScheme scheme_from_tableau(std::string name, const ButcherTableau& t) {
  const std::size_t s = t.b.size();
  if (s == 0 || t.A.size() != s || t.c.size() != s)
    throw std::invalid_argument("inconsistent Butcher tableau");
  RKScheme sc;
  sc.name = std::move(name);
  sc.stages = static_cast<int>(s);
  sc.nodes = t.c;
  sc.tableau = t;
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = i; j < s; ++j)
      if (t.A[i][j] != 0.0) sc.implicit = true;

  const auto M = detail::identity_minus_zA(t);
  sc.denominator = detail::determinant(M);
  // (I - zA)^{-1} = adj / det, adj_{ij} = (-1)^{i+j} det(minor_{ji})
  sc.q_numerators.assign(s, Polynomial{});
  for (std::size_t j = 0; j < s; ++j)
    for (std::size_t i = 0; i < s; ++i) {
      const double sign = ((i + j) % 2 == 0) ? 1.0 : -1.0;
      sc.q_numerators[j] =
          sc.q_numerators[j] + detail::determinant(detail::minor_of(M, j, i)) * (t.b[i] * sign);
    }
  for (const auto& q : sc.q_numerators) sc.tilde_numerator = sc.tilde_numerator + q;

  auto shifted = M;
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < s; ++j) shifted[i][j] = shifted[i][j] + Polynomial{0.0, t.b[j]};
  sc.numerator = detail::determinant(shifted);

  // S = 1 + z S~  <=>  N = W + z Ñ
  const Polynomial identity = sc.denominator + Polynomial{0.0, 1.0} * sc.tilde_numerator;
  const double scale = std::max(1.0, std::fabs(sc.numerator.coeff(0)));
  if (!identity.approx_equal(sc.numerator, 1e-13 * scale))
    throw std::logic_error("stability function inconsistent with S = 1 + z S~ for " + sc.name);
  Polynomial q_sum;
  for (const auto& q : sc.q_numerators) q_sum = q_sum + q;
  if (!q_sum.approx_equal(sc.tilde_numerator))
    throw std::logic_error("forcing weights do not sum to S~ for " + sc.name);
  if (std::fabs(sc.S(0.0) - 1.0) > 1e-15 || std::fabs(sc.S_tilde(0.0) - 1.0) > 1e-14)
    throw std::logic_error("scheme " + sc.name + " is not consistent (S(0) or S~(0) != 1)");
  return sc;
}

/// "FE", "BE", "CN" or "RK4".
inline RKScheme scheme(std::string_view name) {
  if (name == "FE") return scheme_from_tableau("FE", {{{0.0}}, {1.0}, {0.0}});
  if (name == "BE") return scheme_from_tableau("BE", {{{1.0}}, {1.0}, {1.0}});
  if (name == "CN")
    return scheme_from_tableau("CN", {{{0.0, 0.0}, {0.5, 0.5}}, {0.5, 0.5}, {0.0, 1.0}});
  if (name == "RK4")
    return scheme_from_tableau("RK4",
                               {{{0.0, 0.0, 0.0, 0.0},
                                 {0.5, 0.0, 0.0, 0.0},
                                 {0.0, 0.5, 0.0, 0.0},
                                 {0.0, 0.0, 1.0, 0.0}},
                                {1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0},
                                {0.0, 0.5, 0.5, 1.0}});
  throw std::invalid_argument("unknown scheme '" + std::string(name) + "'");
}

/// True when |S| <= 1 at `samples` equispaced points of [-4 d lambda, 0].
inline bool stable_on_spectrum(const RKScheme& sc, int d, double lambda, int samples = 4096) {
  const double left = -4.0 * d * lambda;
  for (int i = 0; i <= samples; ++i) {
    const double z = left * (static_cast<double>(i) / samples);
    const double w = sc.denominator(z);
    if (w == 0.0 || std::fabs(sc.S(z)) > 1.0 + 1e-12) return false;
  }
  return true;
}

}  // namespace srheat
