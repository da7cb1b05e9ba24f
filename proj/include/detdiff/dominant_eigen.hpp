#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <optional>

#include <Eigen/Dense>

#include "detdiff/error.hpp"

namespace detdiff {

template <typename Real>
using ComplexMatrix = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Real>
using ComplexVector = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;

template <typename Real>
struct EigenPair {
  std::complex<Real> value;
  ComplexVector<Real> vector;  // largest-modulus component equal to 1
  int iterations = 0;
  Real residual = 0;           // ||A v - z v||_inf / (|z| ||v||_inf)
};

struct DominantEigenOptions {
  double tolerance = 0.0;      // 0 picks 1000 * machine epsilon of the working type
  double power_tolerance = 1e-7;
  int max_power_iterations = 20000;
  int max_inverse_iterations = 60;
};

namespace detail {

template <typename Real>
Eigen::Index argmax_modulus(const ComplexVector<Real>& v) {
  Eigen::Index best = 0;
  Real best_mod = -1;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const Real m = std::abs(v(i));
    if (m > best_mod) {
      best_mod = m;
      best = i;
    }
  }
  return best;
}

template <typename Real>
bool all_finite(const ComplexVector<Real>& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v(i).real()) || !std::isfinite(v(i).imag())) return false;
  }
  return true;
}

}  // namespace detail

/// Eigenvalue of largest modulus and its eigenvector.
///
/// Power iteration (optionally warm-started) locates the dominant eigenvalue
/// to `power_tolerance`; shifted inverse iteration then polishes the pair to
/// the final tolerance. Throws numerical_error if either phase stalls, which
/// usually means two eigenvalues of equal modulus.
template <typename Real>
EigenPair<Real> leading_eigenpair(const ComplexMatrix<Real>& a, const ComplexVector<Real>* warm_start = nullptr,
                                  const DominantEigenOptions& opts = {}) {
  using C = std::complex<Real>;
  const Eigen::Index n = a.rows();
  if (n == 0 || a.cols() != n) throw validation_error("leading_eigenpair: matrix must be square and nonempty");
  const Real tol = opts.tolerance > 0 ? static_cast<Real>(opts.tolerance)
                                      : Real(1000) * std::numeric_limits<Real>::epsilon();

  ComplexVector<Real> v = (warm_start != nullptr && warm_start->size() == n) ? *warm_start
                                                                             : ComplexVector<Real>::Ones(n);
  if (v.isZero()) v.setOnes();
  v /= v(detail::argmax_modulus<Real>(v));

  const auto residual_of = [&](const ComplexVector<Real>& x, C z) {
    return (a * x - z * x).template lpNorm<Eigen::Infinity>() /
           (std::abs(z) * x.template lpNorm<Eigen::Infinity>());
  };

  EigenPair<Real> out;
  C z{};
  Real res = std::numeric_limits<Real>::infinity();
  for (int it = 0;; ++it) {
    if (it == opts.max_power_iterations) {
      throw numerical_error("leading_eigenpair: power iteration did not converge");
    }
    const ComplexVector<Real> w = a * v;
    z = w(detail::argmax_modulus<Real>(v));
    if (z == C(0)) throw numerical_error("leading_eigenpair: dominant eigenvalue is zero");
    res = (w - z * v).template lpNorm<Eigen::Infinity>() / std::abs(z);
    out.iterations = it + 1;
    if (res <= static_cast<Real>(opts.power_tolerance)) break;
    v = w / w(detail::argmax_modulus<Real>(w));
  }

  const ComplexMatrix<Real> identity = ComplexMatrix<Real>::Identity(n, n);
  for (int it = 0; res > tol; ++it) {
    if (it == opts.max_inverse_iterations) {
      throw numerical_error("leading_eigenpair: inverse iteration did not converge");
    }
    C shift = z;
    ComplexVector<Real> w = (a - shift * identity).partialPivLu().solve(v);
    if (!detail::all_finite<Real>(w) || w.isZero()) {
      // The shift hit the eigenvalue exactly; nudge it off.
      shift *= Real(1) + Real(64) * std::numeric_limits<Real>::epsilon();
      w = (a - shift * identity).partialPivLu().solve(v);
      if (!detail::all_finite<Real>(w)) throw numerical_error("leading_eigenpair: singular shifted system");
    }
    v = w / w(detail::argmax_modulus<Real>(w));
    const ComplexVector<Real> av = a * v;
    z = av(detail::argmax_modulus<Real>(v));
    res = residual_of(v, z);
    ++out.iterations;
  }

  out.value = z;
  out.vector = std::move(v);
  out.residual = res;
  return out;
}

}  // namespace detdiff
