#pragma once

// Continuous-time embeddings of a discrete chain Y_0, Y_1, ... with step eps:
// the floor embedding t -> Y_{floor(t / eps)}, the Poissonized process
// Z_t = Y_{N(t / eps)} driven by a unit-rate Poisson process N with holding
// times E_k, and the random clock
//   Gamma_t = eps (E_1 + ... + E_{floor(t/eps)} + frac(t/eps) E_{floor(t/eps)+1}),
// which couples the two through Y_{floor(t/eps)} = Z_{Gamma_t}.

#include <algorithm>
#include <cmath>
#include <vector>

#include "levylab/errors.hpp"
#include "levylab/parallel.hpp"
#include "levylab/rng.hpp"
#include "levylab/state.hpp"

namespace levylab {

namespace detail {

inline std::size_t check_chain(const std::vector<State>& chain) {
  if (chain.empty()) throw ValidationError("embedding: chain is empty");
  const std::size_t dim = chain.front().is_cemetery() ? 0 : static_cast<std::size_t>(chain.front().point().size());
  bool dead = false;
  for (const auto& s : chain) {
    if (dead && !s.is_cemetery()) throw ValidationError("embedding: chain leaves the cemetery");
    dead = s.is_cemetery();
  }
  return dim;
}

inline std::size_t first_cemetery(const std::vector<State>& chain) {
  for (std::size_t k = 0; k < chain.size(); ++k) {
    if (chain[k].is_cemetery()) return k;
  }
  return chain.size();
}

}  // namespace detail

/// x(t) = chain[floor(t / eps)] on the grid.
inline PathRecord floor_embed(const std::vector<State>& chain, double eps, const TimeGrid& grid,
                              std::size_t dim = 0) {
  if (!(eps > 0.0)) throw ValidationError("floor_embed: eps must be positive");
  const std::size_t chain_dim = detail::check_chain(chain);
  if (dim == 0) dim = chain_dim;
  if (dim == 0) throw ValidationError("floor_embed: dimension unknown for an all-cemetery chain");
  PathRecord record(dim, grid);
  const std::size_t dead = detail::first_cemetery(chain);
  if (dead < chain.size()) record.explode(static_cast<double>(dead) * eps);
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const std::size_t k = floor_index((*grid)[i], eps);
    if (k >= chain.size()) throw RangeError("floor_embed: output grid extends past the end of the chain");
    if (record.alive(i)) record.set(i, chain[k]);
  }
  return record;
}

/// Gamma_t for holding times E (E[0] is E_1).
inline double gamma_clock(const std::vector<double>& E, double eps, double t) {
  if (!(eps > 0.0)) throw ValidationError("gamma_clock: eps must be positive");
  const std::size_t k = floor_index(t, eps);
  double frac = t / eps - static_cast<double>(k);
  if (frac < 1e-12) frac = 0.0;  // t is a knot up to rounding
  if (E.size() < k + (frac > 0.0 ? 1 : 0)) throw RangeError("gamma_clock: not enough exponential draws");
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += E[i];
  if (frac > 0.0) sum += frac * E[k];
  return eps * sum;
}

/// The clock's knot values eps (E_1 + ... + E_k), k = 0..E.size().
inline std::vector<double> clock_knots(const std::vector<double>& E, double eps) {
  std::vector<double> knots(E.size() + 1, 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < E.size(); ++i) {
    sum += E[i];
    knots[i + 1] = eps * sum;  // same rounding as gamma_clock at the knot
  }
  return knots;
}

/// The t with Gamma_t = s, by binary search over the knots.
inline double gamma_inverse(const std::vector<double>& E, double eps, double s) {
  if (s < 0.0) throw RangeError("gamma_inverse: negative clock value");
  const auto knots = clock_knots(E, eps);
  if (s > knots.back()) throw RangeError("gamma_inverse: not enough exponential draws");
  const auto it = std::upper_bound(knots.begin(), knots.end(), s);
  const auto k = static_cast<std::size_t>(it - knots.begin()) - 1;
  if (k == E.size()) return eps * static_cast<double>(k);
  return eps * (static_cast<double>(k) + (s - knots[k]) / (eps * E[k]));
}

struct PoissonizedPath {
  PathRecord path;
  std::vector<double> holding_times;  // E_1, E_2, ...
  bool truncated = false;             // the chain ran out before the grid ended
  std::size_t valid_points = 0;       // grid points computed from the chain
};

/// Z_t = chain[N(t / eps)], N counting arrivals with the given holding times.
/// Grid points past the end of the chain keep its last state and set `truncated`.
inline PoissonizedPath poissonize_with(const std::vector<State>& chain, double eps, std::vector<double> E,
                                       const TimeGrid& grid, std::size_t dim = 0) {
  if (!(eps > 0.0)) throw ValidationError("poissonize: eps must be positive");
  const std::size_t chain_dim = detail::check_chain(chain);
  if (dim == 0) dim = chain_dim;
  if (dim == 0) throw ValidationError("poissonize: dimension unknown for an all-cemetery chain");
  const auto knots = clock_knots(E, eps);  // arrival k happens at time knots[k]
  PoissonizedPath out{PathRecord(dim, grid), std::move(E), false, 0};
  const std::size_t dead = detail::first_cemetery(chain);
  if (dead < chain.size() && dead < knots.size()) out.path.explode(knots[dead]);
  const std::size_t draws = out.holding_times.size();
  std::size_t arrivals = 0;
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const double t = (*grid)[i];
    while (arrivals < draws && knots[arrivals + 1] <= t) ++arrivals;
    // With every holding time used up by t, N(t / eps) is not determined.
    const bool unknown = arrivals == draws && knots.back() <= t;
    if (unknown || arrivals >= chain.size()) out.truncated = true;
    if (!out.truncated) out.valid_points = i + 1;
    if (out.path.alive(i)) out.path.set(i, chain[std::min(arrivals, chain.size() - 1)]);
  }
  return out;
}

/// As poissonize_with, drawing Exp(1) holding times from `rng` until the
/// arrivals pass the end of the grid or the chain is exhausted.
inline PoissonizedPath poissonize(const std::vector<State>& chain, double eps, Rng& rng, const TimeGrid& grid,
                                  std::size_t dim = 0) {
  if (!(eps > 0.0)) throw ValidationError("poissonize: eps must be positive");
  const double horizon = grid->empty() ? 0.0 : grid->back();
  std::vector<double> E;
  double time = 0.0;
  while (time <= horizon && E.size() < chain.size()) {
    E.push_back(rng.exponential());
    time += eps * E.back();
  }
  return poissonize_with(chain, eps, std::move(E), grid, dim);
}

struct DoobReport {
  double bound = 0.0;       // 4 (t + eps) eps / threshold^2
  double frequency = 0.0;   // empirical P(sup_k |Gamma_{k eps} - k eps| >= threshold)
  double standard_error = 0.0;
  std::size_t trials = 0;
  bool passed = true;       // frequency <= bound + 3 SE
};

/// Monte Carlo estimate of P(sup_{s <= t} |Gamma_s - s| >= threshold) over
/// the knots k eps, k <= ceil(t / eps), where the supremum is attained.
inline DoobReport doob_bound_check(double eps, double t, double threshold, std::size_t trials, std::uint64_t seed,
                                   unsigned threads = 1) {
  if (!(eps > 0.0) || !(t > 0.0) || !(threshold > 0.0)) {
    throw ValidationError("doob_bound_check: eps, t and threshold must be positive");
  }
  if (trials < 1) throw ValidationError("doob_bound_check: trials must be >= 1");
  const auto steps = static_cast<std::size_t>(std::ceil(t / eps - 1e-12));
  std::vector<unsigned char> hit(trials, 0);
  parallel_for(trials, threads, [&](std::size_t trial) {
    Rng rng(seed, trial);
    double sum = 0.0;
    for (std::size_t k = 1; k <= steps; ++k) {
      sum += rng.exponential();
      if (std::abs(eps * sum - eps * static_cast<double>(k)) >= threshold) {
        hit[trial] = 1;
        return;
      }
    }
  });
  DoobReport report;
  report.trials = trials;
  report.bound = 4.0 * (t + eps) * eps / (threshold * threshold);
  double count = 0.0;
  for (unsigned char h : hit) count += h;
  report.frequency = count / static_cast<double>(trials);
  report.standard_error = std::sqrt(report.frequency * (1.0 - report.frequency) / static_cast<double>(trials));
  report.passed = report.frequency <= report.bound + 3.0 * report.standard_error;
  return report;
}

}  // namespace levylab
