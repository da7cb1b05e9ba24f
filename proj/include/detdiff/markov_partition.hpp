#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "detdiff/error.hpp"
#include "detdiff/lift_map.hpp"
#include "detdiff/polynomial.hpp"

namespace detdiff {

/// Partition of I_0 into cells [y_{j-1}, y_j); integer translates of these
/// cells partition the whole line.
class MarkovPartition {
 public:
  explicit MarkovPartition(std::vector<double> breakpoints) : y_(std::move(breakpoints)) {
    if (y_.size() < 2 || y_.front() != -0.5 || y_.back() != 0.5) {
      throw validation_error("partition: breakpoints must start at -0.5 and end at 0.5");
    }
    for (std::size_t i = 1; i < y_.size(); ++i) {
      if (!(y_[i] - y_[i - 1] > kBreakpointTolerance)) {
        throw validation_error("partition: breakpoints must be strictly increasing");
      }
    }
  }

  /// The unit cells I_k themselves.
  static MarkovPartition unit() { return MarkovPartition({-0.5, 0.5}); }

  /// Symmetric partition built from its positive inner breakpoints (any
  /// order), with 0 added when the cell count is even.
  static MarkovPartition symmetric(std::span<const double> positive, bool even) {
    std::vector<double> y{-0.5, 0.5};
    for (double s : positive) {
      y.push_back(s);
      y.push_back(-s);
    }
    if (even) y.push_back(0.0);
    std::sort(y.begin(), y.end());
    return MarkovPartition(std::move(y));
  }

  /// Partition whose cells are exactly the pieces of `map`.
  static MarkovPartition from_map(const PiecewiseLinearLiftMap& map) {
    return MarkovPartition({map.breakpoints().begin(), map.breakpoints().end()});
  }

  std::span<const double> breakpoints() const { return y_; }
  std::size_t cell_count() const { return y_.size() - 1; }

  std::vector<double> cell_lengths() const {
    std::vector<double> len(cell_count());
    for (std::size_t j = 0; j < len.size(); ++j) len[j] = y_[j + 1] - y_[j];
    return len;
  }

  /// Index of the cell of I_0 containing u.
  std::size_t cell_index(double u) const {
    const auto it = std::upper_bound(y_.begin() + 1, y_.end() - 1, u);
    return static_cast<std::size_t>(it - (y_.begin() + 1));
  }

  bool is_symmetric(double tol = kBreakpointTolerance) const {
    for (std::size_t i = 0; i < y_.size(); ++i) {
      if (std::abs(y_[i] + y_[y_.size() - 1 - i]) > tol) return false;
    }
    return true;
  }

  /// Distance from v to the nearest point of the form integer + breakpoint.
  double grid_distance(double v) const {
    double best = std::numeric_limits<double>::infinity();
    for (double y : y_) {
      const double d = v - y;
      best = std::min(best, std::abs(d - std::nearbyint(d)));
    }
    return best;
  }

 private:
  std::vector<double> y_;
};

// ---------------------------------------------------------------------------
// Three-interval partitions {[-1/2,-xi), [-xi,xi), [xi,1/2)} for f(x) = Lx.

struct ThreeIntervalSolution {
  double lambda;
  double xi;

  MarkovPartition partition() const {
    const double s[] = {xi};
    return MarkovPartition::symmetric(s, false);
  }
};

/// Closed form for L xi = m + eps2 xi, L/2 = n + eps1 xi.
inline ThreeIntervalSolution solve_three_interval(int m, int n, int eps1, int eps2) {
  if (m <= 0 || n <= m) throw validation_error("three-interval: need integers 0 < m < n");
  if ((eps1 != 1 && eps1 != -1) || (eps2 != 1 && eps2 != -1)) {
    throw validation_error("three-interval: eps1 and eps2 must be +1 or -1");
  }
  const double a = 2.0 * n - eps2;
  const double disc = a * a + 8.0 * m * eps1;
  if (!(disc > 0.0)) throw validation_error("three-interval: negative discriminant");
  const double root = std::sqrt(disc);
  const ThreeIntervalSolution sol{(2.0 * n + eps2 + root) / 2.0, 2.0 * m / (a + root)};
  if (!(sol.xi > 0.0 && sol.xi < 0.5)) {
    std::ostringstream msg;
    msg << "three-interval: xi = " << sol.xi << " is not interior to (0, 1/2)";
    throw validation_error(msg.str());
  }
  if (!(sol.lambda > 1.0)) throw validation_error("three-interval: slope is not above 1");
  return sol;
}

// ---------------------------------------------------------------------------
// General partition equation systems.

/// Right-hand side `constant + coef * ref`; `ref` names an unknown, "half"
/// (the fixed breakpoint 1/2), or is empty.
struct EquationTarget {
  double constant = 0.0;
  int coef = 0;
  std::string ref;
};

/// L * lhs = target, with lhs an unknown or "half".
struct PartitionEquation {
  std::string lhs;
  EquationTarget target;
};

/// Images of the positive breakpoints under f(x) = Lx, each written as an
/// integer or half-integer plus (or minus) another breakpoint.
struct PartitionEquationSystem {
  std::vector<std::string> unknowns;
  std::vector<PartitionEquation> equations;
  bool even = false;  // 0 is also a breakpoint (even cell count)

  static PartitionEquationSystem three_interval(int m, int n, int eps1, int eps2) {
    return {{"xi"},
            {{"xi", {static_cast<double>(m), eps2, "xi"}}, {"half", {static_cast<double>(n), eps1, "xi"}}},
            false};
  }
};

inline constexpr const char* kHalfName = "half";

struct PartitionSolution {
  double lambda = 0.0;
  std::vector<double> values;  // one per unknown, in declaration order
  IntegerPolynomial polynomial;
  long double polynomial_residual = 0.0L;
  double system_residual = 0.0;
  MarkovPartition partition = MarkovPartition::unit();
};

namespace detail {

inline std::int64_t twice_half_integer(double v, const std::string& where) {
  const double twice = 2.0 * v;
  const double r = std::nearbyint(twice);
  if (!std::isfinite(v) || std::abs(twice - r) > 1e-12 || std::abs(r) > 0x1p52) {
    throw validation_error(where + ": constant must be an integer or half-integer");
  }
  return static_cast<std::int64_t>(r);
}

/// Rows: equations. Columns: unknowns, then the right-hand side. All entries
/// scaled by 2 so that half-integer constants become integers.
inline PolynomialMatrix assemble_augmented(const PartitionEquationSystem& sys) {
  const std::size_t u = sys.unknowns.size();
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < u; ++i) {
    if (sys.unknowns[i] == kHalfName || sys.unknowns[i].empty()) {
      throw validation_error("partition system: invalid unknown name '" + sys.unknowns[i] + "'");
    }
    if (!index.emplace(sys.unknowns[i], i).second) {
      throw validation_error("partition system: duplicate unknown '" + sys.unknowns[i] + "'");
    }
  }
  if (sys.equations.size() != u + 1) {
    throw validation_error("partition system: unsupported structure, need " + std::to_string(u + 1) +
                           " equations for " + std::to_string(u) + " unknowns, got " +
                           std::to_string(sys.equations.size()));
  }
  const auto lookup = [&](const std::string& name, const char* role) -> std::ptrdiff_t {
    if (name == kHalfName) return -1;
    const auto it = index.find(name);
    if (it == index.end()) {
      throw validation_error(std::string("partition system: ") + role + " references unknown name '" + name + "'");
    }
    return static_cast<std::ptrdiff_t>(it->second);
  };

  PolynomialMatrix m(u + 1);
  for (std::size_t r = 0; r < sys.equations.size(); ++r) {
    const auto& eq = sys.equations[r];
    const std::string where = "partition system equation " + std::to_string(r);
    auto& rhs = m.at(r, u);
    rhs = rhs + IntegerPolynomial::constant(twice_half_integer(eq.target.constant, where));

    const auto lhs = lookup(eq.lhs, "lhs");
    if (lhs >= 0) {
      auto& a = m.at(r, static_cast<std::size_t>(lhs));
      a = a + IntegerPolynomial::monomial(2, 1);
    } else {
      rhs = rhs - IntegerPolynomial::monomial(1, 1);
    }

    if (eq.target.coef != 0) {
      if (eq.target.ref.empty()) throw validation_error(where + ": coef given without ref");
      const auto ref = lookup(eq.target.ref, "target");
      if (ref >= 0) {
        auto& a = m.at(r, static_cast<std::size_t>(ref));
        a = a - IntegerPolynomial::constant(2 * static_cast<std::int64_t>(eq.target.coef));
      } else {
        rhs = rhs + IntegerPolynomial::constant(eq.target.coef);
      }
    }
  }
  return m;
}

}  // namespace detail

/// Eliminates the breakpoints to get the integer polynomial R(L) = 0 whose
/// largest real root above 1 is the slope, then back-substitutes the
/// breakpoints and checks they form an ordered partition of (0, 1/2).
inline PartitionSolution solve_partition_system(const PartitionEquationSystem& sys) {
  const auto augmented = detail::assemble_augmented(sys);
  const std::size_t u = sys.unknowns.size();

  const auto poly = determinant(augmented).normalized();
  if (poly.degree() < 1) {
    throw validation_error("partition system: unsupported structure, consistency determinant is constant");
  }

  const auto roots = real_roots(poly, 1.0L, root_bound(poly));
  std::vector<long double> above_one;
  for (auto r : roots) {
    if (r > 1.0L + 1e-12L) above_one.push_back(r);
  }
  if (above_one.empty()) {
    throw numerical_error("partition system: " + poly.to_string("L") + " has no real root above 1");
  }

  PartitionSolution sol;
  sol.polynomial = poly;
  sol.lambda = polish_to_double(poly, above_one.back());
  sol.polynomial_residual = poly.evaluate(sol.lambda);

  if (u > 0) {
    Eigen::MatrixXd a(u + 1, u);
    Eigen::VectorXd b(u + 1);
    for (std::size_t r = 0; r <= u; ++r) {
      for (std::size_t c = 0; c < u; ++c) {
        a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            static_cast<double>(augmented.at(r, c).evaluate(sol.lambda));
      }
      b(static_cast<Eigen::Index>(r)) = static_cast<double>(augmented.at(r, u).evaluate(sol.lambda));
    }
    const auto qr = a.colPivHouseholderQr();
    if (qr.rank() < static_cast<Eigen::Index>(u)) {
      throw validation_error("partition system: unsupported structure, breakpoints not determined by the slope");
    }
    const Eigen::VectorXd s = qr.solve(b);
    sol.system_residual = (a * s - b).lpNorm<Eigen::Infinity>();
    sol.values.assign(s.data(), s.data() + s.size());
  }

  std::vector<double> sorted = sol.values;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double lo = (i == 0) ? (sys.even ? 0.0 : -kBreakpointTolerance) : sorted[i - 1];
    if (!(sorted[i] > kBreakpointTolerance && sorted[i] < 0.5 - kBreakpointTolerance) ||
        !(sorted[i] - lo > kBreakpointTolerance)) {
      std::ostringstream msg;
      msg << "partition system: inconsistent, breakpoint " << sorted[i] << " at slope " << sol.lambda
          << " is not strictly inside (0, 1/2) and ordered";
      throw validation_error(msg.str());
    }
  }
  sol.partition = MarkovPartition::symmetric(sorted, sys.even);
  return sol;
}

// ---------------------------------------------------------------------------

struct ConsistencyReport {
  bool consistent = true;
  double worst_violation = 0.0;
  std::string detail;
};

/// The map must be linear on every cell, and every cell endpoint must map to
/// an integer plus a partition breakpoint.
inline ConsistencyReport validate_consistency(const PiecewiseLinearLiftMap& map, const MarkovPartition& partition,
                                              double tol = 1e-9) {
  ConsistencyReport report;
  const auto y = partition.breakpoints();
  const auto note = [&](double violation, const std::string& what) {
    if (violation > report.worst_violation) {
      report.worst_violation = violation;
      report.detail = what;
    }
  };
  for (double x : map.breakpoints()) {
    double nearest = std::numeric_limits<double>::infinity();
    for (double b : y) nearest = std::min(nearest, std::abs(b - x));
    std::ostringstream what;
    what << "map breakpoint " << x << " is not a partition breakpoint";
    note(nearest, what.str());
  }
  for (std::size_t j = 0; j + 1 < y.size(); ++j) {
    const auto& piece = map.pieces()[map.piece_index(0.5 * (y[j] + y[j + 1]))];
    for (double end : {y[j], y[j + 1]}) {
      const double v = piece.at(end);
      std::ostringstream what;
      what << "cell " << j << " endpoint " << end << " maps to " << v
           << ", which is not an integer plus a breakpoint";
      note(partition.grid_distance(v), what.str());
    }
  }
  report.consistent = report.worst_violation <= tol;
  if (report.consistent) report.detail.clear();
  return report;
}

}  // namespace detdiff
