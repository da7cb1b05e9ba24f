#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "detdiff/error.hpp"
#include "detdiff/monte_carlo.hpp"
#include "detdiff/parallel.hpp"
#include "detdiff/random.hpp"

namespace detdiff {

/// Trajectory tangent to the wall: 1 - t u vanishes.
class grazing_error : public numerical_error {
 public:
  using numerical_error::numerical_error;
};

/// Abscissas of two consecutive reflection points in a channel of
/// half-width parameter h.
struct BilliardState {
  double x_prev = 0.0;
  double x_curr = 0.0;
  double h = 1.0;

  double slope() const { return (x_curr - x_prev) / h; }
};

/// tan(a + b) from u = tan a and t = tan b.
inline double outgoing_slope(double u, double t) {
  const double den = 1.0 - t * u;
  if (std::abs(den) < 1e-12) throw grazing_error("billiard: grazing reflection (1 - t u = 0)");
  return (u + t) / den;
}

/// Ideal reflection off a wall whose normal is tilted by alpha(x_curr).
template <typename Angle>
BilliardState exact_step(const BilliardState& s, Angle&& alpha) {
  if (!(s.h > 0.0)) throw validation_error("billiard: h must be positive");
  const double a = alpha(s.x_curr);
  if (!(std::abs(2.0 * a) < 0.5 * std::numbers::pi)) {
    throw validation_error("billiard: |2 alpha| must stay below pi/2");
  }
  const double u = s.slope();
  if (!std::isfinite(u)) throw validation_error("billiard: incoming slope is not finite");
  const double un = outgoing_slope(u, std::tan(2.0 * a));
  return {s.x_curr, s.x_curr + s.h * un, s.h};
}

/// x_{n+1} = 2 x_n - x_{n-1} + f(x_n).
template <typename F>
BilliardState approximate_step(const BilliardState& s, F&& f) {
  return {s.x_curr, 2.0 * s.x_curr - s.x_prev + f(s.x_curr), s.h};
}

/// x_{n+1} = x_0 + (n+1)(x_1 - x_0) + sum_{k=1..n} (n+1-k) f(x_k), with
/// f_values[k-1] = f(x_k).
inline double sum_form_position(double x0, double x1, std::span<const double> f_values) {
  const auto n = static_cast<double>(f_values.size());
  double acc = x0 + (n + 1.0) * (x1 - x0);
  for (std::size_t k = 1; k <= f_values.size(); ++k) {
    acc += (n + 1.0 - static_cast<double>(k)) * f_values[k - 1];
  }
  return acc;
}

/// n^2/12 + (L^2/12) n(n+1)(2n+1)/6, from treating the f(x_k) as
/// independent with variance L^2/12.
inline double theoretical_variance(std::size_t n, double lambda) {
  const auto nd = static_cast<double>(n);
  return nd * nd / 12.0 + lambda * lambda / 12.0 * nd * (nd + 1.0) * (2.0 * nd + 1.0) / 6.0;
}

/// f(x) = L (x - floor x).
struct Sawtooth {
  double lambda = 1.0;
  double operator()(double x) const { return lambda * (x - std::floor(x)); }
};

struct ChannelOptions {
  std::vector<std::size_t> checkpoints;  // empty: n/8, n/4, n/2, n
  std::optional<double> lambda;          // fills the theoretical column
  double abort_threshold = 1e12;
  unsigned threads = 0;
};

struct ChannelCheckpoint {
  std::size_t step = 0;
  double variance = 0.0;
  double theoretical_variance = std::numeric_limits<double>::quiet_NaN();
  double exponent_so_far = std::numeric_limits<double>::quiet_NaN();
};

struct ChannelResult {
  EnsembleStats stats;  // of x_n
  double growth_exponent = std::numeric_limits<double>::quiet_NaN();
  std::vector<ChannelCheckpoint> checkpoints;
  std::size_t discarded = 0;
  std::string warning;
};

namespace detail {

inline std::vector<std::size_t> channel_checkpoints(std::size_t n, std::vector<std::size_t> requested) {
  if (requested.empty()) requested = {n / 8, n / 4, n / 2, n};
  std::vector<std::size_t> out;
  for (auto c : requested) {
    if (c > n) throw validation_error("billiard: checkpoint " + std::to_string(c) + " exceeds n");
    if (c >= 1) out.push_back(c);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.empty()) throw validation_error("billiard: no positive checkpoints");
  return out;
}

/// Least-squares slope of log v against log s.
inline double log_log_slope(std::span<const ChannelCheckpoint> pts) {
  if (pts.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : pts) {
    const double x = std::log(static_cast<double>(p.step));
    const double y = std::log(p.variance);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const auto k = static_cast<double>(pts.size());
  const double den = k * sxx - sx * sx;
  return den == 0.0 ? std::numeric_limits<double>::quiet_NaN() : (k * sxy - sx * sy) / den;
}

/// Shared driver: x_0 = 0, x_1 uniform on I_0, then `step` until x_n.
template <typename Step>
ChannelResult run_channel(Step&& step, std::size_t N, std::size_t n, std::uint64_t seed,
                          const ChannelOptions& opts) {
  if (N < 2) throw validation_error("billiard: need at least two samples");
  if (n < 1) throw validation_error("billiard: need n >= 1");
  const auto cps = channel_checkpoints(n, opts.checkpoints);
  if (cps.back() != n) throw validation_error("billiard: the last checkpoint must be n");
  const std::size_t mid = n / 2;
  const std::size_t width = cps.size() + 1;  // checkpoints, then x_{n/2}
  std::vector<double> record(N * width);
  std::vector<unsigned char> dropped(N, 0);
  parallel_for(
      N,
      [&](std::size_t i) {
        auto gen = substream(seed, 0, i);
        BilliardState s{0.0, uniform01(gen) - 0.5, 1.0};
        double* row = record.data() + i * width;
        row[cps.size()] = 0.0;  // x_0, kept when n/2 == 0
        std::size_t next_cp = 0;
        try {
          for (std::size_t k = 1;; ++k) {
            // s.x_curr is x_k here
            if (!std::isfinite(s.x_curr) || std::abs(s.x_curr) > opts.abort_threshold) {
              dropped[i] = 1;
              return;
            }
            if (k == mid) row[cps.size()] = s.x_curr;
            while (next_cp < cps.size() && cps[next_cp] == k) row[next_cp++] = s.x_curr;
            if (k == n) return;
            s = step(s);
          }
        } catch (const grazing_error&) {
          dropped[i] = 1;
        }
      },
      opts.threads);

  ChannelResult out;
  std::vector<std::vector<double>> columns(width);
  for (std::size_t i = 0; i < N; ++i) {
    if (dropped[i]) {
      ++out.discarded;
      continue;
    }
    for (std::size_t c = 0; c < width; ++c) columns[c].push_back(record[i * width + c]);
  }
  if (columns[0].size() < 2) throw numerical_error("billiard: fewer than two samples survived");

  for (std::size_t c = 0; c < cps.size(); ++c) {
    ChannelCheckpoint cp;
    cp.step = cps[c];
    cp.variance = mean_and_variance(columns[c]).second;
    if (opts.lambda) cp.theoretical_variance = theoretical_variance(cp.step, *opts.lambda);
    out.checkpoints.push_back(cp);
    out.checkpoints.back().exponent_so_far = log_log_slope(out.checkpoints);
  }
  out.growth_exponent = out.checkpoints.back().exponent_so_far;

  EnsembleSamples final_samples;
  final_samples.steps = n;
  final_samples.midpoint_step = mid;
  final_samples.final_positions = std::move(columns[cps.size() - 1]);
  final_samples.midpoint_positions = std::move(columns[cps.size()]);
  final_samples.aborted = out.discarded;
  out.stats = estimate_stats(final_samples);
  if (out.discarded * 100 > N) {
    out.warning = std::to_string(out.discarded) + " of " + std::to_string(N) +
                  " samples discarded (grazing or overflow), above 1%";
  }
  return out;
}

}  // namespace detail

/// Ensemble of the second-order map x_{k+1} = 2 x_k - x_{k-1} + f(x_k).
template <typename F>
ChannelResult simulate_channel(F f, std::size_t N, std::size_t n, std::uint64_t seed,
                               ChannelOptions opts = {}) {
  if (opts.checkpoints.empty() || opts.checkpoints.back() != n) {
    auto cps = detail::channel_checkpoints(n, opts.checkpoints);
    if (cps.back() != n) cps.push_back(n);
    opts.checkpoints = cps;
  }
  return detail::run_channel([&f](const BilliardState& s) { return approximate_step(s, f); }, N, n, seed, opts);
}

/// Same ensemble with exact reflections off a wall tilted by alpha(x) at
/// half-width h. Positions are scaled so that x_1 - x_0 plays the role of
/// h u, matching the approximate model when f = h tan(2 alpha).
template <typename Angle>
ChannelResult simulate_exact_channel(Angle alpha, double h, std::size_t N, std::size_t n, std::uint64_t seed,
                                     ChannelOptions opts = {}) {
  if (!(h > 0.0)) throw validation_error("billiard: h must be positive");
  if (opts.checkpoints.empty() || opts.checkpoints.back() != n) {
    auto cps = detail::channel_checkpoints(n, opts.checkpoints);
    if (cps.back() != n) cps.push_back(n);
    opts.checkpoints = cps;
  }
  return detail::run_channel(
      [&](const BilliardState& s) {
        BilliardState scaled{s.x_prev, s.x_curr, h};
        return exact_step(scaled, alpha);
      },
      N, n, seed, opts);
}

}  // namespace detdiff
