#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <string>
#include <vector>

#include "detdiff/error.hpp"

namespace detdiff {

/// Univariate polynomial with 64-bit integer coefficients, lowest degree
/// first. Arithmetic throws numerical_error on overflow.
class IntegerPolynomial {
 public:
  IntegerPolynomial() = default;
  explicit IntegerPolynomial(std::vector<std::int64_t> coeffs) : c_(std::move(coeffs)) { trim(); }

  static IntegerPolynomial constant(std::int64_t a) { return IntegerPolynomial({a}); }
  static IntegerPolynomial monomial(std::int64_t a, std::size_t degree) {
    std::vector<std::int64_t> c(degree + 1, 0);
    c[degree] = a;
    return IntegerPolynomial(std::move(c));
  }

  bool is_zero() const { return c_.empty(); }
  int degree() const { return static_cast<int>(c_.size()) - 1; }
  std::int64_t coefficient(std::size_t i) const { return i < c_.size() ? c_[i] : 0; }
  const std::vector<std::int64_t>& coefficients() const { return c_; }
  std::int64_t leading() const { return c_.empty() ? 0 : c_.back(); }

  friend bool operator==(const IntegerPolynomial&, const IntegerPolynomial&) = default;

  friend IntegerPolynomial operator+(const IntegerPolynomial& a, const IntegerPolynomial& b) {
    std::vector<std::int64_t> c(std::max(a.c_.size(), b.c_.size()), 0);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = checked_add(a.coefficient(i), b.coefficient(i));
    return IntegerPolynomial(std::move(c));
  }

  friend IntegerPolynomial operator-(const IntegerPolynomial& a) {
    auto c = a.c_;
    for (auto& x : c) x = checked_mul(x, -1);
    return IntegerPolynomial(std::move(c));
  }

  friend IntegerPolynomial operator-(const IntegerPolynomial& a, const IntegerPolynomial& b) { return a + (-b); }

  friend IntegerPolynomial operator*(const IntegerPolynomial& a, const IntegerPolynomial& b) {
    if (a.is_zero() || b.is_zero()) return {};
    std::vector<std::int64_t> c(a.c_.size() + b.c_.size() - 1, 0);
    for (std::size_t i = 0; i < a.c_.size(); ++i) {
      for (std::size_t j = 0; j < b.c_.size(); ++j) {
        c[i + j] = checked_add(c[i + j], checked_mul(a.c_[i], b.c_[j]));
      }
    }
    return IntegerPolynomial(std::move(c));
  }

  IntegerPolynomial derivative() const {
    if (c_.size() <= 1) return {};
    std::vector<std::int64_t> d(c_.size() - 1);
    for (std::size_t i = 1; i < c_.size(); ++i) d[i - 1] = checked_mul(c_[i], static_cast<std::int64_t>(i));
    return IntegerPolynomial(std::move(d));
  }

  /// Horner evaluation in extended precision.
  long double evaluate(long double x) const {
    long double acc = 0.0L;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * x + static_cast<long double>(*it);
    return acc;
  }

  /// Divides out the coefficient gcd and any factor x^k, and makes the
  /// leading coefficient positive.
  IntegerPolynomial normalized() const {
    if (is_zero()) return {};
    std::size_t low = 0;
    while (c_[low] == 0) ++low;
    std::vector<std::int64_t> c(c_.begin() + static_cast<std::ptrdiff_t>(low), c_.end());
    std::int64_t g = 0;
    for (auto x : c) g = std::gcd(g, x);
    const std::int64_t sign = c.back() < 0 ? -1 : 1;
    for (auto& x : c) x = x / g * sign;
    return IntegerPolynomial(std::move(c));
  }

  /// "x^3 - 4x^2 - 4x + 3"
  std::string to_string(const std::string& var = "x") const {
    if (is_zero()) return "0";
    std::string out;
    for (int i = degree(); i >= 0; --i) {
      const auto a = c_[static_cast<std::size_t>(i)];
      if (a == 0) continue;
      const auto mag = a < 0 ? -static_cast<unsigned long long>(a) : static_cast<unsigned long long>(a);
      if (out.empty()) {
        if (a < 0) out += "-";
      } else {
        out += a < 0 ? " - " : " + ";
      }
      if (mag != 1 || i == 0) out += std::to_string(mag);
      if (i >= 1) out += var;
      if (i >= 2) out += "^" + std::to_string(i);
    }
    return out;
  }

 private:
  static std::int64_t checked_add(std::int64_t a, std::int64_t b) {
    std::int64_t r = 0;
    if (__builtin_add_overflow(a, b, &r)) throw numerical_error("polynomial coefficient overflow");
    return r;
  }
  static std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
    std::int64_t r = 0;
    if (__builtin_mul_overflow(a, b, &r)) throw numerical_error("polynomial coefficient overflow");
    return r;
  }
  void trim() {
    while (!c_.empty() && c_.back() == 0) c_.pop_back();
  }

  std::vector<std::int64_t> c_;
};

/// Square matrix of integer polynomials, row-major.
struct PolynomialMatrix {
  std::size_t size = 0;
  std::vector<IntegerPolynomial> entries;

  explicit PolynomialMatrix(std::size_t n) : size(n), entries(n * n) {}
  IntegerPolynomial& at(std::size_t r, std::size_t c) { return entries[r * size + c]; }
  const IntegerPolynomial& at(std::size_t r, std::size_t c) const { return entries[r * size + c]; }
};

namespace detail {

inline IntegerPolynomial determinant_minor(const PolynomialMatrix& m, std::vector<std::size_t>& rows,
                                           std::vector<std::size_t>& cols) {
  if (rows.size() == 1) return m.at(rows[0], cols[0]);
  // Expand along the sparsest remaining column.
  std::size_t best = 0;
  std::size_t best_nonzero = rows.size() + 1;
  for (std::size_t ci = 0; ci < cols.size(); ++ci) {
    std::size_t nz = 0;
    for (auto r : rows) nz += m.at(r, cols[ci]).is_zero() ? 0 : 1;
    if (nz < best_nonzero) {
      best_nonzero = nz;
      best = ci;
    }
  }
  if (best_nonzero == 0) return {};
  const std::size_t col = cols[best];
  cols.erase(cols.begin() + static_cast<std::ptrdiff_t>(best));
  IntegerPolynomial det;
  for (std::size_t ri = 0; ri < rows.size(); ++ri) {
    const auto& entry = m.at(rows[ri], col);
    if (entry.is_zero()) continue;
    const std::size_t row = rows[ri];
    rows.erase(rows.begin() + static_cast<std::ptrdiff_t>(ri));
    auto term = entry * determinant_minor(m, rows, cols);
    rows.insert(rows.begin() + static_cast<std::ptrdiff_t>(ri), row);
    det = ((ri + best) % 2 == 0) ? det + term : det - term;
  }
  cols.insert(cols.begin() + static_cast<std::ptrdiff_t>(best), col);
  return det;
}

}  // namespace detail

/// Exact determinant by cofactor expansion (sparse-column first). Intended for
/// the small, sparse matrices that come out of partition equation systems.
inline IntegerPolynomial determinant(const PolynomialMatrix& m) {
  if (m.size == 0) return IntegerPolynomial::constant(1);
  std::vector<std::size_t> rows(m.size);
  std::vector<std::size_t> cols(m.size);
  std::iota(rows.begin(), rows.end(), 0);
  std::iota(cols.begin(), cols.end(), 0);
  return detail::determinant_minor(m, rows, cols);
}

namespace detail {

inline int sign_of(long double v) { return (v > 0) - (v < 0); }

/// Root of p in [a, b] given a sign change, by bisection to full extended
/// precision followed by Newton steps that are only accepted inside the bracket.
inline long double refine_root(const IntegerPolynomial& p, long double a, long double b) {
  int sa = sign_of(p.evaluate(a));
  for (int it = 0; it < 200; ++it) {
    const long double mid = 0.5L * (a + b);
    if (mid <= a || mid >= b) break;
    const int sm = sign_of(p.evaluate(mid));
    if (sm == 0) return mid;
    if (sm == sa) {
      a = mid;
    } else {
      b = mid;
    }
  }
  const auto dp = p.derivative();
  long double x = 0.5L * (a + b);
  for (int it = 0; it < 8; ++it) {
    const long double d = dp.evaluate(x);
    if (d == 0.0L) break;
    const long double next = x - p.evaluate(x) / d;
    if (!(next >= a && next <= b) || next == x) break;
    x = next;
  }
  return x;
}

}  // namespace detail

/// All distinct real roots of p in the closed interval [lo, hi], ascending.
/// Roots are isolated between consecutive critical points (roots of p'),
/// found recursively, so each monotone stretch holds at most one root.
inline std::vector<long double> real_roots(const IntegerPolynomial& p, long double lo, long double hi) {
  std::vector<long double> roots;
  if (p.degree() <= 0 || lo > hi) return roots;
  std::vector<long double> knots{lo};
  for (auto c : real_roots(p.derivative(), lo, hi)) {
    if (c > knots.back() && c < hi) knots.push_back(c);
  }
  knots.push_back(hi);
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const long double a = knots[i];
    const long double b = knots[i + 1];
    const long double fa = p.evaluate(a);
    const long double fb = p.evaluate(b);
    long double root = 0;
    if (fa == 0.0L) {
      root = a;
    } else if (detail::sign_of(fa) * detail::sign_of(fb) < 0) {
      root = detail::refine_root(p, a, b);
    } else if (fb == 0.0L && i + 2 == knots.size()) {
      root = b;
    } else {
      continue;
    }
    if (roots.empty() || root > roots.back()) roots.push_back(root);
  }
  return roots;
}

/// Upper bound on the modulus of every root (Cauchy).
inline long double root_bound(const IntegerPolynomial& p) {
  long double m = 0;
  const auto lead = static_cast<long double>(std::llabs(p.leading()));
  for (int i = 0; i < p.degree(); ++i) {
    m = std::max(m, std::abs(static_cast<long double>(p.coefficient(static_cast<std::size_t>(i)))) / lead);
  }
  return 1.0L + m;
}

/// Double nearest to a root: the neighbour of `x` with the smallest |p|.
inline double polish_to_double(const IntegerPolynomial& p, long double x) {
  double best = static_cast<double>(x);
  long double best_val = std::abs(p.evaluate(best));
  for (double cand : {std::nextafter(best, -INFINITY), std::nextafter(best, INFINITY)}) {
    const long double v = std::abs(p.evaluate(cand));
    if (v < best_val) {
      best_val = v;
      best = cand;
    }
  }
  return best;
}

}  // namespace detdiff
