#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "detdiff/error.hpp"

namespace detdiff {

/// Absolute tolerance used for equality of breakpoints and endpoint values.
inline constexpr double kBreakpointTolerance = 1e-12;

/// Index k of the unit cell I_k = [k - 1/2, k + 1/2) containing x.
/// Exact half-integers belong to the cell on their right (round half up).
inline std::int64_t nearest_integer(double x) {
  if (!std::isfinite(x)) {
    throw validation_error("nearest_integer: non-finite argument");
  }
  if (std::abs(x) >= 0x1p62) {
    throw numerical_error("nearest_integer: argument outside the 64-bit cell range");
  }
  // x - floor(x) is exact here, unlike floor(x + 0.5) which rounds for
  // values just below a half-integer.
  const double fl = std::floor(x);
  auto k = static_cast<std::int64_t>(fl);
  if (x - fl >= 0.5) ++k;
  return k;
}

/// Signed offset of x from the centre of its cell, in [-1/2, 1/2).
inline double centred_fraction(double x) {
  return x - static_cast<double>(nearest_integer(x));
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  double midpoint() const { return 0.5 * (lo + hi); }
  bool contains(double x, double tol = 0.0) const { return x >= lo - tol && x <= hi + tol; }
};

/// One linear piece of the map on [left, right) inside I_0, stored in
/// slope/intercept form so that f(x) = slope * x is evaluated exactly for the
/// pure linear map.
struct LinearPiece {
  double left;
  double right;
  double value_left;   // f(left+)
  double value_right;  // f(right-)
  double slope;
  double intercept;

  double at(double u) const { return slope * u + intercept; }
  double image_lo() const { return std::min(value_left, value_right); }
  double image_hi() const { return std::max(value_left, value_right); }
};

/// A position on the line split into its cell index and its offset inside
/// the cell. Iterating in this form keeps the offset at full precision no
/// matter how far the orbit has travelled.
struct LiftPoint {
  std::int64_t cell = 0;
  double offset = 0.0;

  static LiftPoint from_position(double x) {
    const auto k = nearest_integer(x);
    return {k, x - static_cast<double>(k)};
  }
  double position() const { return static_cast<double>(cell) + offset; }
};

/// Piecewise-linear function on I_0 = [-1/2, 1/2) extended to the whole line
/// by f(k + x) = k + f(x).
class PiecewiseLinearLiftMap {
 public:
  PiecewiseLinearLiftMap(std::vector<double> breakpoints,
                         std::vector<std::pair<double, double>> values)
      : breakpoints_(std::move(breakpoints)) {
    if (breakpoints_.size() < 2) {
      throw validation_error("lift map: need at least the two breakpoints -1/2 and 1/2");
    }
    if (breakpoints_.front() != -0.5 || breakpoints_.back() != 0.5) {
      throw validation_error("lift map: breakpoints must start at -0.5 and end at 0.5");
    }
    if (values.size() + 1 != breakpoints_.size()) {
      throw validation_error("lift map: need one (left, right) value pair per piece");
    }
    pieces_.reserve(values.size());
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double a = breakpoints_[j];
      const double b = breakpoints_[j + 1];
      const auto [va, vb] = values[j];
      if (!std::isfinite(a) || !std::isfinite(b) || !(a < b)) {
        throw validation_error("lift map: breakpoints must be finite and strictly increasing");
      }
      if (!std::isfinite(va) || !std::isfinite(vb)) {
        throw validation_error("lift map: non-finite endpoint value on piece " + std::to_string(j));
      }
      if (std::abs(vb - va) <= kBreakpointTolerance) {
        throw validation_error("lift map: piece " + std::to_string(j) + " has zero slope");
      }
      const double slope = (vb - va) / (b - a);
      pieces_.push_back({a, b, va, vb, slope, va - slope * a});
    }
  }

  /// f(x) = slope * x on I_0.
  static PiecewiseLinearLiftMap linear(double slope) {
    if (!std::isfinite(slope) || slope == 0.0) {
      throw validation_error("linear map: slope must be finite and nonzero");
    }
    PiecewiseLinearLiftMap map({-0.5, 0.5}, {{-0.5 * slope, 0.5 * slope}});
    map.pieces_[0].intercept = 0.0;
    map.linear_slope_ = slope;
    return map;
  }

  /// Odd zig-zag map with f(0) = 0, f(xi) = p + 1/2 and f(1/2) = 1/2.
  static PiecewiseLinearLiftMap zigzag(int p, double xi) {
    if (!(xi > 0.0 && xi < 0.5)) {
      throw validation_error("zigzag map: xi must lie in (0, 1/2)");
    }
    const double peak = p + 0.5;
    return PiecewiseLinearLiftMap({-0.5, -xi, xi, 0.5},
                                  {{-0.5, -peak}, {-peak, peak}, {peak, 0.5}});
  }

  std::span<const double> breakpoints() const { return breakpoints_; }
  std::span<const LinearPiece> pieces() const { return pieces_; }
  std::size_t piece_count() const { return pieces_.size(); }

  /// Slope when the map was built as f(x) = slope * x.
  std::optional<double> linear_slope() const { return linear_slope_; }

  /// Index of the piece containing u, for u in [-1/2, 1/2).
  std::size_t piece_index(double u) const {
    const auto it = std::upper_bound(breakpoints_.begin() + 1, breakpoints_.end() - 1, u);
    return static_cast<std::size_t>(it - (breakpoints_.begin() + 1));
  }

  /// f restricted to I_0.
  double on_main_interval(double u) const { return pieces_[piece_index(u)].at(u); }

  double operator()(double x) const {
    const auto k = nearest_integer(x);
    return static_cast<double>(k) + on_main_interval(x - static_cast<double>(k));
  }

  /// s(x) = f(x) - x, 1-periodic.
  double shift(double x) const {
    const auto k = nearest_integer(x);
    const double u = x - static_cast<double>(k);
    return on_main_interval(u) - u;
  }

  LiftPoint advance(LiftPoint p) const {
    const double y = on_main_interval(p.offset);
    const auto c = nearest_integer(y);
    std::int64_t cell = 0;
    if (__builtin_add_overflow(p.cell, c, &cell)) {
      throw numerical_error("lift map: cell index overflow");
    }
    return {cell, y - static_cast<double>(c)};
  }

  double min_abs_slope() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& piece : pieces_) m = std::min(m, std::abs(piece.slope));
    return m;
  }

  /// Smallest and largest value of f on I_0.
  Interval image_bounds() const {
    Interval out{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& piece : pieces_) {
      out.lo = std::min(out.lo, piece.image_lo());
      out.hi = std::max(out.hi, piece.image_hi());
    }
    return out;
  }

 private:
  std::vector<double> breakpoints_;
  std::vector<LinearPiece> pieces_;
  std::optional<double> linear_slope_;
};

inline double eval_map(const PiecewiseLinearLiftMap& map, double x) { return map(x); }

inline double shift_function(const PiecewiseLinearLiftMap& map, double x) { return map.shift(x); }

/// Minimum |slope| over all pieces. The map is stretching iff this exceeds 1.
inline double validate_stretching(const PiecewiseLinearLiftMap& map) { return map.min_abs_slope(); }

/// Sequence of visited cells ([x_0), [x_1), ..., [x_{n-1})).
using Route = std::vector<std::int64_t>;

inline Route compute_route(const PiecewiseLinearLiftMap& map, double x0, std::size_t n) {
  if (n == 0) throw validation_error("compute_route: n must be at least 1");
  Route route;
  route.reserve(n);
  auto p = LiftPoint::from_position(x0);
  route.push_back(p.cell);
  for (std::size_t i = 1; i < n; ++i) {
    p = map.advance(p);
    route.push_back(p.cell);
  }
  return route;
}

namespace detail {

inline std::vector<Interval> merge_components(std::vector<Interval> parts) {
  std::sort(parts.begin(), parts.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> merged;
  for (const auto& part : parts) {
    if (!merged.empty() && part.lo <= merged.back().hi + 4 * std::numeric_limits<double>::epsilon()) {
      merged.back().hi = std::max(merged.back().hi, part.hi);
    } else {
      merged.push_back(part);
    }
  }
  // Isolated points come from a target endpoint touching the end of a piece's
  // image; they carry no measure and are dropped when anything else survives.
  const bool has_extent = std::any_of(merged.begin(), merged.end(),
                                      [](const Interval& c) { return c.width() > 0.0; });
  if (has_extent) {
    std::erase_if(merged, [](const Interval& c) { return c.width() <= 0.0; });
  }
  return merged;
}

}  // namespace detail

/// Every closed component of the set of x_0 in I_{route[0]} whose orbit visits
/// the cells listed in `route`, built by nesting preimages backwards from the
/// last cell.
inline std::vector<Interval> route_preimages(const PiecewiseLinearLiftMap& map,
                                             std::span<const std::int64_t> route) {
  if (route.empty()) throw validation_error("route_preimages: empty route");
  const auto last = static_cast<double>(route.back());
  std::vector<Interval> target{{last - 0.5, last + 0.5}};
  for (std::size_t i = route.size() - 1; i-- > 0;) {
    const auto k = static_cast<double>(route[i]);
    std::vector<Interval> preimage;
    for (const auto& piece : map.pieces()) {
      for (const auto& t : target) {
        const double y0 = (t.lo - k - piece.intercept) / piece.slope;
        const double y1 = (t.hi - k - piece.intercept) / piece.slope;
        const double lo = std::max(std::min(y0, y1), piece.left);
        const double hi = std::min(std::max(y0, y1), piece.right);
        if (lo <= hi) preimage.push_back({k + lo, k + hi});
      }
    }
    target = detail::merge_components(std::move(preimage));
    if (target.empty()) break;
  }
  return target;
}

/// Closed interval of initial conditions realising `route`. For a stretching
/// map its width is at most min|slope|^-(n-1).
/// Throws validation_error when no orbit realises the route, or when the route
/// is realised on several disjoint intervals (possible for non-monotone maps).
inline Interval reconstruct_initial(const PiecewiseLinearLiftMap& map,
                                    std::span<const std::int64_t> route) {
  if (!(map.min_abs_slope() > 1.0)) {
    throw validation_error("reconstruct_initial: map is not stretching");
  }
  const auto parts = route_preimages(map, route);
  if (parts.empty()) throw validation_error("reconstruct_initial: inadmissible route");
  if (parts.size() > 1) {
    throw validation_error("reconstruct_initial: route is realised on " + std::to_string(parts.size()) +
                           " disjoint intervals");
  }
  return parts.front();
}

}  // namespace detdiff
