#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "detdiff/density.hpp"
#include "detdiff/error.hpp"
#include "detdiff/lift_map.hpp"
#include "detdiff/parallel.hpp"
#include "detdiff/random.hpp"

namespace detdiff {

struct MonteCarloOptions {
  double abort_threshold = 1e9;
  // Redraw the digits of the offset below its floating-point resolution
  // before each expanding step. Without this, repeated multiplication by an
  // even integer slope shifts the mantissa out and orbits collapse onto
  // dyadic rationals.
  bool refine_below_resolution = true;
  unsigned threads = 0;  // 0: worker_count()
  std::uint64_t stream = 0;
};

/// Final positions x_n and midpoint positions x_{n/2} of the kept samples.
struct EnsembleSamples {
  std::size_t steps = 0;
  std::size_t midpoint_step = 0;
  std::vector<double> final_positions;
  std::vector<double> midpoint_positions;
  std::size_t aborted = 0;
};

namespace detail {

inline double resolution_of(double y) {
  const double a = std::abs(y);
  return std::nextafter(a, std::numeric_limits<double>::infinity()) - a;
}

struct OrbitResult {
  double final_position;
  double midpoint_position;
  bool aborted;
};

inline OrbitResult run_orbit(const PiecewiseLinearLiftMap& map, std::size_t n, std::size_t mid,
                             std::mt19937_64& gen, const MonteCarloOptions& opts) {
  LiftPoint p{0, uniform_centred_open(gen)};
  double res = 0x1p-53;
  OrbitResult out{0.0, p.position(), false};
  for (std::size_t step = 1; step <= n; ++step) {
    double u = p.offset;
    const LinearPiece* piece = &map.pieces()[map.piece_index(u)];
    if (opts.refine_below_resolution && std::abs(piece->slope) > 1.0) {
      u = std::clamp(u + uniform_centred_open(gen) * res, -0.5, std::nextafter(0.5, 0.0));
      piece = &map.pieces()[map.piece_index(u)];
    }
    const double y = piece->at(u);
    const auto c = nearest_integer(y);
    if (__builtin_add_overflow(p.cell, c, &p.cell)) {
      out.aborted = true;
      return out;
    }
    p.offset = y - static_cast<double>(c);
    res = resolution_of(y);
    if (std::abs(p.position()) > opts.abort_threshold) {
      out.aborted = true;
      return out;
    }
    if (step == mid) out.midpoint_position = p.position();
  }
  out.final_position = p.position();
  return out;
}

}  // namespace detail

/// N trajectories from x_0 uniform on I_0, iterated n steps. Sample i draws
/// from its own substream (seed, opts.stream, i).
inline EnsembleSamples simulate_ensemble(const PiecewiseLinearLiftMap& map, std::size_t N, std::size_t n,
                                         std::uint64_t seed, const MonteCarloOptions& opts = {}) {
  if (N < 1) throw validation_error("simulate: need at least one sample");
  if (n < 1) throw validation_error("simulate: need at least one step");
  const std::size_t mid = n / 2;
  std::vector<detail::OrbitResult> orbits(N);
  parallel_for(
      N,
      [&](std::size_t i) {
        auto gen = substream(seed, opts.stream, i);
        orbits[i] = detail::run_orbit(map, n, mid, gen, opts);
      },
      opts.threads);
  EnsembleSamples out;
  out.steps = n;
  out.midpoint_step = mid;
  out.final_positions.reserve(N);
  out.midpoint_positions.reserve(N);
  for (const auto& o : orbits) {
    if (o.aborted) {
      ++out.aborted;
      continue;
    }
    out.final_positions.push_back(o.final_position);
    out.midpoint_positions.push_back(o.midpoint_position);
  }
  return out;
}

struct EnsembleStats {
  std::size_t N = 0;
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;
  double d_estimate = 0.0;  // variance / (2n)
  double drift_estimate = 0.0;
  double d_stderr = 0.0;
  // (Var x_n - Var x_m) / (2 (n - m)) with m = n/2. Cancels the O(1) offset
  // in Var x_n that biases variance / (2n) at moderate n.
  double d_increment = 0.0;
  double d_increment_stderr = 0.0;
  std::optional<double> ks;
  std::string diagnostic;
};

/// Largest gap between the empirical CDF of `sorted` and Normal(mean, variance).
inline double ks_statistic_normal(std::span<const double> sorted, double mean, double variance) {
  const double sd = std::sqrt(variance);
  const auto count = static_cast<double>(sorted.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double F = 0.5 * std::erfc(-(sorted[i] - mean) / (sd * std::sqrt(2.0)));
    worst = std::max({worst, (static_cast<double>(i) + 1.0) / count - F, F - static_cast<double>(i) / count});
  }
  return std::clamp(worst, 0.0, 1.0);
}

namespace detail {

inline std::pair<double, double> mean_and_variance(std::span<const double> x) {
  const double mean = pairwise_sum(x) / static_cast<double>(x.size());
  std::vector<double> sq(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) sq[i] = (x[i] - mean) * (x[i] - mean);
  return {mean, pairwise_sum(sq) / static_cast<double>(x.size() - 1)};
}

}  // namespace detail

inline EnsembleStats estimate_stats(const EnsembleSamples& samples) {
  const auto& x = samples.final_positions;
  if (x.size() < 2) throw validation_error("estimate_stats: variance is undefined for fewer than two samples");
  EnsembleStats s;
  s.N = x.size();
  s.n = samples.steps;
  const auto Nd = static_cast<double>(s.N);
  const auto nd = static_cast<double>(s.n);
  std::tie(s.mean, s.variance) = detail::mean_and_variance(x);
  s.d_estimate = s.variance / (2.0 * nd);
  s.drift_estimate = s.mean / nd;
  s.d_stderr = std::sqrt(2.0 * s.variance * s.variance / ((Nd - 1.0) * 4.0 * nd * nd));

  const auto& xm = samples.midpoint_positions;
  const auto [mean_m, var_m] = detail::mean_and_variance(xm);
  const double gap = 2.0 * static_cast<double>(samples.steps - samples.midpoint_step);
  s.d_increment = (s.variance - var_m) / gap;
  std::vector<double> y(s.N);
  for (std::size_t i = 0; i < s.N; ++i) {
    y[i] = (x[i] - s.mean) * (x[i] - s.mean) - (xm[i] - mean_m) * (xm[i] - mean_m);
  }
  const auto [y_mean, y_var] = detail::mean_and_variance(y);
  (void)y_mean;
  s.d_increment_stderr = std::sqrt(y_var / Nd) / gap;

  if (!(s.variance > 0.0)) {
    s.diagnostic = "degenerate sample: zero variance, KS test against a normal law rejected";
  } else {
    std::vector<double> sorted(x);
    std::sort(sorted.begin(), sorted.end());
    s.ks = ks_statistic_normal(sorted, s.mean, s.variance);
  }
  if (samples.aborted > 0) {
    if (!s.diagnostic.empty()) s.diagnostic += "; ";
    s.diagnostic += std::to_string(samples.aborted) + " samples aborted beyond the position threshold";
  }
  return s;
}

struct ScanRow {
  double lambda = 0.0;
  double d_mc = std::numeric_limits<double>::quiet_NaN();
  double stderr_mc = std::numeric_limits<double>::quiet_NaN();
  double d_heuristic = std::numeric_limits<double>::quiet_NaN();
  double d_omega = std::numeric_limits<double>::quiet_NaN();
  double ks = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

/// Monte Carlo D for f(x) = L x over a grid of slopes. Point i uses stream
/// i of `seed`. A failing point keeps its error message and the scan goes on.
inline std::vector<ScanRow> scan_lambda(std::span<const double> grid, std::size_t N, std::size_t n,
                                        std::uint64_t seed, MonteCarloOptions opts = {}) {
  std::vector<ScanRow> rows;
  rows.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    ScanRow row;
    row.lambda = grid[i];
    try {
      row.d_heuristic = heuristic_D(row.lambda);
      if (row.lambda >= 3.0) row.d_omega = omega_approx_D(row.lambda);
      opts.stream = i;
      const auto stats = estimate_stats(simulate_ensemble(PiecewiseLinearLiftMap::linear(row.lambda), N, n, seed, opts));
      row.d_mc = stats.d_increment;
      row.stderr_mc = stats.d_increment_stderr;
      if (stats.ks) row.ks = *stats.ks;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detdiff
