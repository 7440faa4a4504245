#pragma once

// Distribution comparisons for fixed-time marginals (Kolmogorov-Smirnov,
// Wasserstein-1), martingale residuals of recorded paths, and explosion
// statistics.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "levylab/errors.hpp"
#include "levylab/operator.hpp"
#include "levylab/rng.hpp"
#include "levylab/state.hpp"

namespace levylab {

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Asymptotic Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} e^{-2 k^2 lambda^2}.
inline double kolmogorov_survival(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

// Stephens' small-sample correction of the asymptotic p-value.
inline double ks_p_value(double statistic, double effective_n) {
  const double root = std::sqrt(effective_n);
  return kolmogorov_survival((root + 0.12 + 0.11 / root) * statistic);
}

/// Two-sample KS statistic sup |F_a - F_b| with its asymptotic p-value.
inline KsResult ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ValidationError("ks_distance: samples must be nonempty");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return {d, ks_p_value(d, na * nb / (na + nb))};
}

/// One-sample KS statistic against a continuous CDF.
inline KsResult ks_against_cdf(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw ValidationError("ks_against_cdf: sample must be nonempty");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return {d, ks_p_value(d, n)};
}

/// c(level) sqrt((n + m) / (n m)) with c = sqrt(-ln(level / 2) / 2); the
/// asymptotic two-sample critical value.
inline double ks_critical_value(std::size_t n, std::size_t m, double level = 0.01) {
  if (n == 0 || m == 0) throw ValidationError("ks_critical_value: sizes must be positive");
  const double c = std::sqrt(-0.5 * std::log(0.5 * level));
  return c * std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * static_cast<double>(m)));
}

inline double ks_critical_value_one_sample(std::size_t n, double level = 0.01) {
  if (n == 0) throw ValidationError("ks_critical_value: size must be positive");
  return std::sqrt(-0.5 * std::log(0.5 * level)) / std::sqrt(static_cast<double>(n));
}

inline double normal_cdf(double x, double mean = 0.0, double sd = 1.0) {
  return 0.5 * std::erfc(-(x - mean) / (sd * std::numbers::sqrt2));
}

/// int |F_a - F_b| dx; for equal sizes this is the mean gap of sorted samples.
inline double wasserstein1(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ValidationError("wasserstein1: samples must be nonempty");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a.size() == b.size()) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
    return sum / static_cast<double>(a.size());
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double x = std::min(a.front(), b.front());
  double total = 0.0;
  while (i < a.size() || j < b.size()) {
    const double next = j == b.size() || (i < a.size() && a[i] <= b[j]) ? a[i] : b[j];
    total += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - x);
    x = next;
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
  }
  return total;
}

/// Adds independent Uniform(-width/2, width/2) noise: turns a lattice-valued
/// sample with spacing `width` into a continuous one whose CDF agrees with the
/// lattice CDF at cell midpoints.
inline std::vector<double> dequantize(std::vector<double> sample, double width, std::uint64_t seed,
                                      std::uint64_t stream = 0) {
  Rng rng(seed, stream);
  for (double& x : sample) x += width * (rng.uniform() - 0.5);
  return sample;
}

struct MeanEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

inline MeanEstimate mean_with_error(const std::vector<double>& values) {
  if (values.empty()) return {};
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double var = values.size() > 1 ? ss / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

inline double sample_variance(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double se = mean_with_error(values).standard_error;
  return se * se * static_cast<double>(values.size());
}

struct ResidualReport {
  std::vector<double> times;
  std::vector<double> mean;           // mean of M_t - M_0
  std::vector<double> standard_error;
  std::vector<double> allowance;      // C * ds
  std::vector<bool> passed;
  bool all_passed = true;
  bool degenerate = false;            // no path ever started inside U
};

/// M_t = f(X_{t ^ tau}) - int_0^{t ^ tau} g(X_s) ds along each recorded path,
/// with tau the first grid time at which the path is outside the open box U
/// (or at the cemetery) and a left-endpoint rule on the batch grid. At each
/// requested time the zero-mean hypothesis passes when
/// |mean(M_t - M_0)| <= 3 SE + C ds, ds being the largest grid step.
inline ResidualReport martingale_residual(const PathBatch& batch, const TestFunction& f,
                                          const std::function<double(const Point&)>& g, const Box& U,
                                          const std::vector<double>& times, double discretization_constant = 0.0) {
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw ValidationError("martingale_residual: times must be increasing");
  }
  const auto& grid = *batch.grid;
  std::vector<std::size_t> index;
  for (double t : times) index.push_back(batch.time_index(t));
  double ds = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) ds = std::max(ds, grid[i] - grid[i - 1]);

  ResidualReport report;
  report.times = times;
  std::vector<std::vector<double>> samples(times.size());
  std::size_t inside = 0;
  for (const auto& path : batch.paths) {
    auto in_u = [&](std::size_t i) { return path.alive(i) && U.contains_open(path.state(i).point()); };
    const double m0 = f(path.state(0));
    if (in_u(0)) ++inside;
    double integral = 0.0;
    std::size_t stop = grid.size();  // index of tau on the grid
    std::size_t next = 0;
    for (std::size_t i = 0; i < grid.size() && next < times.size(); ++i) {
      if (stop == grid.size() && !in_u(i)) stop = i;
      while (next < times.size() && index[next] == i) {
        const std::size_t at = std::min(i, stop);
        samples[next].push_back(f(path.state(at)) - integral - m0);
        ++next;
      }
      if (stop == grid.size() && i + 1 < grid.size()) integral += g(path.state(i).point()) * (grid[i + 1] - grid[i]);
    }
  }
  report.degenerate = inside == 0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const auto est = mean_with_error(samples[k]);
    report.mean.push_back(est.mean);
    report.standard_error.push_back(est.standard_error);
    report.allowance.push_back(discretization_constant * ds);
    const bool ok = std::abs(est.mean) <= 3.0 * est.standard_error + discretization_constant * ds;
    report.passed.push_back(ok);
    report.all_passed = report.all_passed && ok;
  }
  return report;
}

struct ExplosionReport {
  std::vector<double> times;
  std::vector<double> exploded_fraction;  // per grid time
  double final_fraction = 0.0;
  double earliest_explosion = kInfinity;
  bool absorption_holds = true;
};

inline ExplosionReport explosion_stats(const PathBatch& batch) {
  ExplosionReport report;
  const auto& grid = *batch.grid;
  report.times.assign(grid.begin(), grid.end());
  report.exploded_fraction.assign(grid.size(), 0.0);
  if (batch.paths.empty()) return report;
  for (const auto& path : batch.paths) {
    report.absorption_holds = report.absorption_holds && path.absorption_holds();
    report.earliest_explosion = std::min(report.earliest_explosion, path.explosion_time());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!path.alive(i)) report.exploded_fraction[i] += 1.0;
    }
  }
  for (double& f : report.exploded_fraction) f /= static_cast<double>(batch.paths.size());
  report.final_fraction = report.exploded_fraction.empty() ? 0.0 : report.exploded_fraction.back();
  return report;
}

}  // namespace levylab
