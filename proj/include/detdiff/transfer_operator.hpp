#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "detdiff/dominant_eigen.hpp"
#include "detdiff/error.hpp"
#include "detdiff/lift_map.hpp"
#include "detdiff/markov_partition.hpp"

namespace detdiff {

/// p_j(i, l): density delivered to cell i of I_{k+j} by unit density on
/// cell l of I_k.
struct ShiftMatrix {
  int shift;
  Eigen::MatrixXd p;
};

class TransitionMatrixSet {
 public:
  TransitionMatrixSet(std::vector<ShiftMatrix> matrices, std::vector<double> cell_lengths)
      : lengths_(std::move(cell_lengths)) {
    const auto m = static_cast<Eigen::Index>(lengths_.size());
    if (m == 0) throw validation_error("transition matrices: no cells");
    double total = 0.0;
    for (double len : lengths_) {
      if (!(len > 0.0)) throw validation_error("transition matrices: cell lengths must be positive");
      total += len;
    }
    if (std::abs(total - 1.0) > 1e-12) throw validation_error("transition matrices: cell lengths must sum to 1");
    std::map<int, Eigen::MatrixXd> merged;
    for (auto& sm : matrices) {
      if (sm.p.rows() != m || sm.p.cols() != m) {
        throw validation_error("transition matrices: shift " + std::to_string(sm.shift) + " has wrong dimensions");
      }
      if ((sm.p.array() < 0.0).any()) {
        throw validation_error("transition matrices: negative entry at shift " + std::to_string(sm.shift));
      }
      auto [it, inserted] = merged.try_emplace(sm.shift, Eigen::MatrixXd::Zero(m, m));
      it->second += sm.p;
    }
    for (auto& [shift, p] : merged) {
      if (!p.isZero()) matrices_.push_back({shift, std::move(p)});
    }
    if (matrices_.empty()) throw validation_error("transition matrices: all matrices are zero");
  }

  /// One-cell set from jump probabilities p_k.
  static TransitionMatrixSet scalar(const std::map<int, double>& jumps) {
    std::vector<ShiftMatrix> ms;
    for (const auto& [k, pk] : jumps) ms.push_back({k, Eigen::MatrixXd::Constant(1, 1, pk)});
    return TransitionMatrixSet(std::move(ms), {1.0});
  }

  std::size_t cell_count() const { return lengths_.size(); }
  const std::vector<double>& cell_lengths() const { return lengths_; }
  const std::vector<ShiftMatrix>& matrices() const { return matrices_; }
  int min_shift() const { return matrices_.front().shift; }
  int max_shift() const { return matrices_.back().shift; }

  /// p_shift, or a zero matrix.
  Eigen::MatrixXd at(int shift) const {
    for (const auto& sm : matrices_) {
      if (sm.shift == shift) return sm.p;
    }
    const auto m = static_cast<Eigen::Index>(lengths_.size());
    return Eigen::MatrixXd::Zero(m, m);
  }

  /// E = sum_j p_j.
  Eigen::MatrixXd total() const {
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(matrices_.front().p.rows(), matrices_.front().p.cols());
    for (const auto& sm : matrices_) e += sm.p;
    return e;
  }

  /// Largest relative violation of sum_{j,i} p_j(i,l) len_i = len_l.
  double mass_defect() const {
    const Eigen::Map<const Eigen::RowVectorXd> len(lengths_.data(), static_cast<Eigen::Index>(lengths_.size()));
    const Eigen::RowVectorXd out = len * total();
    double worst = 0.0;
    for (Eigen::Index l = 0; l < out.size(); ++l) worst = std::max(worst, std::abs(out(l) - len(l)) / len(l));
    return worst;
  }

 private:
  std::vector<double> lengths_;
  std::vector<ShiftMatrix> matrices_;
};

/// Transfer matrices of `map` over a consistent partition: each cell l is
/// mapped linearly onto a union of whole cells, each receiving density
/// 1/|slope_l|.
inline TransitionMatrixSet build_transition_matrices(const PiecewiseLinearLiftMap& map,
                                                     const MarkovPartition& partition, double tol = 1e-9) {
  const auto y = partition.breakpoints();
  const std::size_t m = partition.cell_count();
  std::map<int, Eigen::MatrixXd> mats;
  for (std::size_t l = 0; l < m; ++l) {
    const double a = y[l];
    const double b = y[l + 1];
    const auto& piece = map.pieces()[map.piece_index(0.5 * (a + b))];
    if (piece.left > a + tol || piece.right < b - tol) {
      throw validation_error("transition matrices: map is not linear on cell " + std::to_string(l));
    }
    const double va = piece.at(a);
    const double vb = piece.at(b);
    const double lo = std::min(va, vb);
    const double hi = std::max(va, vb);
    const double density = 1.0 / std::abs(piece.slope);
    double covered = 0.0;
    const auto k_lo = static_cast<int>(std::floor(lo)) - 1;
    const auto k_hi = static_cast<int>(std::ceil(hi)) + 1;
    for (int k = k_lo; k <= k_hi; ++k) {
      for (std::size_t i = 0; i < m; ++i) {
        const double c = k + y[i];
        const double d = k + y[i + 1];
        if (c >= lo - tol && d <= hi + tol) {
          auto [it, inserted] = mats.try_emplace(k, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m),
                                                                          static_cast<Eigen::Index>(m)));
          it->second(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) += density;
          covered += d - c;
        }
      }
    }
    if (std::abs(covered - (hi - lo)) > 10 * tol) {
      std::ostringstream msg;
      msg << "transition matrices: image [" << lo << ", " << hi << ") of cell " << l
          << " is not a union of partition cells";
      throw validation_error(msg.str());
    }
  }
  std::vector<ShiftMatrix> out;
  for (auto& [k, p] : mats) out.push_back({k, std::move(p)});
  return TransitionMatrixSet(std::move(out), partition.cell_lengths());
}

/// P(lambda) = sum_j p_j e^{i j lambda}, in the requested precision.
template <typename Real>
ComplexMatrix<Real> characteristic_matrix_as(const TransitionMatrixSet& set, Real lambda) {
  const auto m = static_cast<Eigen::Index>(set.cell_count());
  ComplexMatrix<Real> out = ComplexMatrix<Real>::Zero(m, m);
  for (const auto& sm : set.matrices()) {
    const std::complex<Real> phase = std::polar(Real(1), static_cast<Real>(sm.shift) * lambda);
    out += sm.p.cast<Real>().template cast<std::complex<Real>>() * phase;
  }
  return out;
}

inline Eigen::MatrixXcd characteristic_matrix(const TransitionMatrixSet& set, double lambda) {
  return characteristic_matrix_as<double>(set, lambda);
}

inline std::complex<double> leading_eigenvalue(const Eigen::MatrixXcd& matrix) {
  return leading_eigenpair<double>(matrix).value;
}

/// z(lambda) along a path of lambda values, each solve warm-started from the
/// previous eigenvector. One tracker per caller.
template <typename Real = long double>
class LeadingEigenvalueTracker {
 public:
  explicit LeadingEigenvalueTracker(const TransitionMatrixSet& set) : set_(&set) {}

  std::complex<Real> operator()(Real lambda) {
    const auto pair = leading_eigenpair<Real>(characteristic_matrix_as<Real>(*set_, lambda),
                                              warm_.size() > 0 ? &warm_ : nullptr);
    warm_ = pair.vector;
    worst_residual_ = std::max(worst_residual_, static_cast<double>(pair.residual));
    return pair.value;
  }

  void reset() { warm_.resize(0); }
  double worst_residual() const { return worst_residual_; }

 private:
  const TransitionMatrixSet* set_;
  ComplexVector<Real> warm_;
  double worst_residual_ = 0.0;
};

enum class Method { spectral, closed_form, heuristic, omega, monte_carlo };

inline std::string_view method_name(Method m) {
  switch (m) {
    case Method::spectral: return "spectral";
    case Method::closed_form: return "closed-form";
    case Method::heuristic: return "heuristic";
    case Method::omega: return "omega";
    case Method::monte_carlo: return "monte-carlo";
  }
  return "unknown";
}

struct DiffusionReport {
  double D = 0.0;
  double drift = 0.0;
  std::vector<double> alpha;
  Method method = Method::spectral;
  std::map<std::string, double> diagnostics;
};

/// Positive eigenvector of E at eigenvalue 1, scaled so that
/// sum_j alpha_j len_j = 1.
inline std::vector<double> stationary_density(const TransitionMatrixSet& set) {
  const Eigen::MatrixXd e = set.total();
  const auto m = e.rows();
  // absolute threshold: E - I may be rounding noise only (a single cell)
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(e - Eigen::MatrixXd::Identity(m, m));
  const auto kernel = (svd.singularValues().array() < 1e-9).count();
  if (kernel != 1) {
    throw validation_error("stationary density: eigenvalue 1 has a " + std::to_string(kernel) +
                           "-dimensional eigenspace, transfer matrix is not irreducible");
  }
  const auto pair = leading_eigenpair<long double>(e.cast<long double>().cast<std::complex<long double>>());
  if (std::abs(pair.value - std::complex<long double>(1.0L)) > 1e-10L) {
    throw validation_error("stationary density: leading eigenvalue of E is not 1 (mass is not conserved)");
  }
  long double norm = 0.0L;
  for (Eigen::Index j = 0; j < m; ++j) norm += pair.vector(j).real() * set.cell_lengths()[static_cast<std::size_t>(j)];
  std::vector<double> alpha(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j) {
    alpha[static_cast<std::size_t>(j)] = static_cast<double>(pair.vector(j).real() / norm);
    if (!(alpha[static_cast<std::size_t>(j)] > 1e-12)) {
      throw validation_error("stationary density: eigenvector is not strictly positive");
    }
  }
  return alpha;
}

struct SpectralOptions {
  double step = 1e-3;
  double target_gap = 1e-9;  // acceptable disagreement between refinements
  double max_gap = 1e-7;     // beyond this the derivative is declared unstable
};

/// D = -1/2 d^2/dl^2 log z(l) and drift = Im d/dl log z(l) at l = 0, where
/// z is the leading eigenvalue of P(l). Both derivatives use central
/// differences at h, h/2, h/4 with one Richardson step; the two
/// extrapolants must agree.
inline DiffusionReport diffusion_spectral(const TransitionMatrixSet& set, const SpectralOptions& opts = {}) {
  using R = long double;
  DiffusionReport report;
  report.method = Method::spectral;
  report.alpha = stationary_density(set);

  LeadingEigenvalueTracker<R> tracker(set);
  const std::complex<R> z0 = tracker(0.0L);
  if (std::abs(z0 - std::complex<R>(1.0L)) > 1e-12L) {
    throw numerical_error("spectral diffusion: z(0) differs from 1");
  }
  const std::complex<R> log_z0 = std::log(z0);

  struct Estimate {
    double step;
    double d;
    double drift;
    double gap;
  };
  const auto estimate_at = [&](R h) {
    R second[3];
    R first[3];
    for (int level = 0; level < 3; ++level) {
      const R step = h / static_cast<R>(1 << level);
      tracker.reset();
      tracker(0.0L);
      const auto fp = std::log(tracker(step));
      tracker.reset();
      tracker(0.0L);
      const auto fm = std::log(tracker(-step));
      second[level] = -0.5L * (fp - 2.0L * log_z0 + fm).real() / (step * step);
      first[level] = (fp - fm).imag() / (2.0L * step);
    }
    const R d1 = (4 * second[1] - second[0]) / 3;
    const R d2 = (4 * second[2] - second[1]) / 3;
    const R v1 = (4 * first[1] - first[0]) / 3;
    const R v2 = (4 * first[2] - first[1]) / 3;
    const R gap = std::max(std::abs(d1 - d2), std::abs(v1 - v2));
    return Estimate{static_cast<double>(h), static_cast<double>(d2), static_cast<double>(v2), static_cast<double>(gap)};
  };

  Estimate best{0, 0, 0, std::numeric_limits<double>::infinity()};
  for (double factor : {1.0, 2.0, 0.5, 4.0, 0.25, 10.0}) {
    const auto e = estimate_at(static_cast<R>(opts.step * factor));
    if (e.gap < best.gap) best = e;
    if (best.gap <= opts.target_gap) break;
  }
  if (best.gap > opts.max_gap) {
    std::ostringstream msg;
    msg << "spectral diffusion: finite-difference estimates disagree by " << best.gap;
    throw numerical_error(msg.str());
  }
  report.D = best.d;
  report.drift = best.drift;
  report.diagnostics["step"] = best.step;
  report.diagnostics["richardson_gap"] = best.gap;
  report.diagnostics["eigen_residual"] = tracker.worst_residual();
  report.diagnostics["mass_defect"] = set.mass_defect();
  return report;
}

}  // namespace detdiff
