#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "detdiff/error.hpp"
#include "detdiff/lift_map.hpp"
#include "detdiff/transfer_operator.hpp"

namespace detdiff {

/// Piecewise-constant density on the cells I_{k,j}, k in [k_min, k_max].
/// Values are densities; masses are density times cell length.
class LatticeDensity {
 public:
  LatticeDensity(std::int64_t k_min, std::vector<double> values, std::vector<double> cell_lengths,
                 std::size_t step = 0)
      : k_min_(k_min), values_(std::move(values)), lengths_(std::move(cell_lengths)), step_(step) {
    if (lengths_.empty()) throw validation_error("lattice density: no cells");
    if (values_.empty() || values_.size() % lengths_.size() != 0) {
      throw validation_error("lattice density: value count is not a multiple of the cell count");
    }
  }

  /// Unit density on I_0, i.e. P_k(0) = delta_{k,0}.
  static LatticeDensity uniform_on_main_cell(std::vector<double> cell_lengths) {
    std::vector<double> values(cell_lengths.size(), 1.0);
    return LatticeDensity(0, std::move(values), std::move(cell_lengths));
  }

  std::int64_t k_min() const { return k_min_; }
  std::int64_t k_max() const { return k_min_ + static_cast<std::int64_t>(site_count()) - 1; }
  std::size_t site_count() const { return values_.size() / lengths_.size(); }
  std::size_t cell_count() const { return lengths_.size(); }
  std::size_t step() const { return step_; }
  const std::vector<double>& cell_lengths() const { return lengths_; }
  const std::vector<double>& values() const { return values_; }

  double value(std::int64_t k, std::size_t j) const {
    if (k < k_min_ || k > k_max()) return 0.0;
    return values_[static_cast<std::size_t>(k - k_min_) * lengths_.size() + j];
  }

  double mass_at(std::int64_t k) const {
    double m = 0.0;
    for (std::size_t j = 0; j < lengths_.size(); ++j) m += value(k, j) * lengths_[j];
    return m;
  }

  double mass() const {
    double m = 0.0;
    for (auto k = k_min_; k <= k_max(); ++k) m += mass_at(k);
    return m;
  }

  /// Mean and variance of the cell index k under the mass distribution.
  std::pair<double, double> lattice_moments() const {
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    for (auto k = k_min_; k <= k_max(); ++k) {
      const double w = mass_at(k);
      const auto kd = static_cast<double>(k);
      m0 += w;
      m1 += w * kd;
      m2 += w * kd * kd;
    }
    const double mean = m1 / m0;
    return {mean, m2 / m0 - mean * mean};
  }

 private:
  std::int64_t k_min_;
  std::vector<double> values_;
  std::vector<double> lengths_;
  std::size_t step_;
};

/// One application of P_k(n+1) = sum_j p_j P_{k-j}(n).
inline LatticeDensity evolve_step(const TransitionMatrixSet& set, const LatticeDensity& current) {
  const std::size_t m = set.cell_count();
  if (current.cell_count() != m) throw validation_error("evolve: density and transfer matrices differ in cell count");
  const std::int64_t k_min = current.k_min() + set.min_shift();
  const std::size_t sites = current.site_count() + static_cast<std::size_t>(set.max_shift() - set.min_shift());
  std::vector<double> next(sites * m, 0.0);
  const auto em = static_cast<Eigen::Index>(m);
  for (std::size_t s = 0; s < current.site_count(); ++s) {
    const Eigen::Map<const Eigen::VectorXd> src(current.values().data() + s * m, em);
    for (const auto& sm : set.matrices()) {
      const auto dest = s + static_cast<std::size_t>(sm.shift - set.min_shift());
      Eigen::Map<Eigen::VectorXd> dst(next.data() + dest * m, em);
      dst.noalias() += sm.p * src;
    }
  }
  return LatticeDensity(k_min, std::move(next), current.cell_lengths(), current.step() + 1);
}

inline LatticeDensity evolve(const TransitionMatrixSet& set, LatticeDensity initial, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) initial = evolve_step(set, initial);
  return initial;
}

/// alpha_j / (2 sqrt(pi D n)) exp(-(k - drift n)^2 / (4 D n)) on every site
/// where some cell value reaches 1e-16, renormalised to unit mass.
inline LatticeDensity gaussian_profile(double D, double drift, std::span<const double> alpha,
                                       std::vector<double> cell_lengths, std::size_t n) {
  if (!(D > 0.0)) throw validation_error("gaussian profile: D must be positive");
  if (n == 0) throw validation_error("gaussian profile: n must be at least 1");
  if (alpha.size() != cell_lengths.size()) throw validation_error("gaussian profile: alpha/cell count mismatch");
  const double dn = D * static_cast<double>(n);
  const double mean = drift * static_cast<double>(n);
  const double peak = *std::max_element(alpha.begin(), alpha.end()) / (2.0 * std::sqrt(std::numbers::pi * dn));
  const double reach = peak > 1e-16 ? std::sqrt(4.0 * dn * std::log(peak / 1e-16)) : 0.0;
  const auto k_lo = static_cast<std::int64_t>(std::ceil(mean - reach));
  const auto k_hi = std::max(k_lo, static_cast<std::int64_t>(std::floor(mean + reach)));
  const std::size_t m = alpha.size();
  std::vector<double> values(static_cast<std::size_t>(k_hi - k_lo + 1) * m);
  double mass = 0.0;
  for (auto k = k_lo; k <= k_hi; ++k) {
    const double dk = static_cast<double>(k) - mean;
    const double g = std::exp(-dk * dk / (4.0 * dn)) / (2.0 * std::sqrt(std::numbers::pi * dn));
    for (std::size_t j = 0; j < m; ++j) {
      const double v = alpha[j] * g;
      values[static_cast<std::size_t>(k - k_lo) * m + j] = v;
      mass += v * cell_lengths[j];
    }
  }
  for (auto& v : values) v /= mass;
  return LatticeDensity(k_lo, std::move(values), std::move(cell_lengths), n);
}

/// sup |CDF_a - CDF_b| over cell boundaries, cells ordered by (k, j).
inline double kolmogorov_distance(const LatticeDensity& a, const LatticeDensity& b) {
  if (a.cell_count() != b.cell_count()) throw validation_error("kolmogorov distance: cell layouts differ");
  for (std::size_t j = 0; j < a.cell_count(); ++j) {
    if (std::abs(a.cell_lengths()[j] - b.cell_lengths()[j]) > 1e-12) {
      throw validation_error("kolmogorov distance: cell layouts differ");
    }
  }
  double ca = 0.0, cb = 0.0, worst = 0.0;
  for (auto k = std::min(a.k_min(), b.k_min()); k <= std::max(a.k_max(), b.k_max()); ++k) {
    for (std::size_t j = 0; j < a.cell_count(); ++j) {
      ca += a.value(k, j) * a.cell_lengths()[j];
      cb += b.value(k, j) * b.cell_lengths()[j];
      worst = std::max(worst, std::abs(ca - cb));
    }
  }
  return worst;
}

/// D = 1/2 integral_{I_0} f^2 - 1/24 for maps whose pieces all start and end
/// on half-integers. Each piece contributes its exact quadratic integral.
inline double closed_form_D(const PiecewiseLinearLiftMap& map) {
  double integral = 0.0;
  for (const auto& piece : map.pieces()) {
    for (double v : {piece.value_left, piece.value_right}) {
      const double twice = 2.0 * v;
      const double r = std::nearbyint(twice);
      if (std::abs(twice - r) > 1e-9 || std::fmod(std::abs(r), 2.0) != 1.0) {
        throw validation_error("closed-form D: endpoint value " + std::to_string(v) + " is not a half-integer");
      }
    }
    const double v0 = piece.value_left;
    const double v1 = piece.value_right;
    integral += (piece.right - piece.left) * (v0 * v0 + v0 * v1 + v1 * v1) / 3.0;
  }
  return 0.5 * integral - 1.0 / 24.0;
}

/// Closed-form report: these maps preserve Lebesgue measure, so alpha is
/// uniform on the unit partition and the drift is the mean of f(x) - x.
inline DiffusionReport closed_form_report(const PiecewiseLinearLiftMap& map) {
  DiffusionReport r;
  r.method = Method::closed_form;
  r.D = closed_form_D(map);
  double drift = 0.0;
  for (const auto& piece : map.pieces()) {
    drift += (piece.right - piece.left) *
             (0.5 * (piece.value_left + piece.value_right) - 0.5 * (piece.left + piece.right));
  }
  r.drift = drift;
  r.alpha = {1.0};
  return r;
}

struct JumpMoments {
  double first;   // sigma_1 = sum k p_k
  double second;  // sigma^2 = sum k^2 p_k
};

/// Moments of the scalar jump law of a one-cell transfer set.
inline JumpMoments second_moment(const TransitionMatrixSet& set) {
  if (set.cell_count() != 1) throw validation_error("second moment: only defined for one-cell partitions");
  JumpMoments out{0.0, 0.0};
  for (const auto& sm : set.matrices()) {
    out.first += sm.shift * sm.p(0, 0);
    out.second += static_cast<double>(sm.shift) * sm.shift * sm.p(0, 0);
  }
  return out;
}

/// (L - 1)^2 / 24: treats successive fractional parts as independent uniform
/// variables. Approximate only; off by 50% at L = 4.
inline double heuristic_D(double lambda) {
  if (!(lambda > 2.0)) throw validation_error("heuristic D: slope must exceed 2");
  return (lambda - 1.0) * (lambda - 1.0) / 24.0;
}

/// 2-periodic interpolant equal to 2 - 3|L - 4| on [3, 5].
inline double omega(double lambda) {
  if (!(lambda >= 3.0)) throw validation_error("omega: slope must be at least 3");
  const double t = 3.0 + std::fmod(lambda - 3.0, 2.0);
  return 2.0 - 3.0 * std::abs(t - 4.0);
}

/// Exact D for f(x) = L x with integer L >= 2: (L^2 - 1)/24 when odd,
/// (L - 1)(L - 2)/24 when even.
inline double integer_slope_D(int lambda) {
  if (lambda < 2) throw validation_error("integer slope D: slope must be at least 2");
  const double l = lambda;
  return lambda % 2 != 0 ? (l * l - 1.0) / 24.0 : (l - 1.0) * (l - 2.0) / 24.0;
}

inline double omega_approx_D(double lambda) {
  return (lambda - 1.0) * (lambda - omega(lambda)) / 24.0;
}

}  // namespace detdiff
