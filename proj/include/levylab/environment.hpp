#pragma once

// Random walks in a random environment. An environment is a sequence
// (q_k) on a window of Z; its potential is the piecewise-constant
//   W(a) = q_1 + ... + q_{floor(a/eps)}              for a >= eps,
//   W(a) = 0                                         on [0, eps),
//   W(a) = -(q_0 + q_{-1} + ... + q_{floor(a/eps)+1}) for a < 0,
// so that W(k eps) - W((k-1) eps) = q_k. The quenched walk on Z moves from k
// to k + 1 with probability 1 / (e^{q_k} + 1) and is reported as
// t -> eps Y_{floor(t / eps^2)}.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "levylab/diagnostics.hpp"
#include "levylab/errors.hpp"
#include "levylab/potential.hpp"
#include "levylab/rng.hpp"
#include "levylab/simulation.hpp"
#include "levylab/state.hpp"

namespace levylab {

/// q_k = sqrt(eps) * xi_k with xi_k i.i.d., mean 0 and variance sigma^2.
/// `base` draws xi; by default a centred normal with standard deviation sigma.
struct IidScaled {
  double sigma = 1.0;
  std::function<double(Rng&)> base;
};

/// q_k = q with probability lambda eps, 0 otherwise.
struct BernoulliPoisson {
  double q = 1.0;
  double lambda = 1.0;
};

/// q_k drawn by a user sampler given (eps, k).
struct CustomEnvironment {
  std::function<double(double eps, long long k, Rng&)> sample;
};

using EnvironmentSpec = std::variant<IidScaled, BernoulliPoisson, CustomEnvironment>;

inline void check_environment(const EnvironmentSpec& spec, double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ValidationError("environment: eps must be positive");
  if (const auto* iid = std::get_if<IidScaled>(&spec)) {
    if (!(iid->sigma >= 0.0) || !std::isfinite(iid->sigma)) {
      throw ValidationError("environment: sigma must be finite and >= 0");
    }
  } else if (const auto* bp = std::get_if<BernoulliPoisson>(&spec)) {
    if (!std::isfinite(bp->q)) throw ValidationError("environment: jump height q must be finite");
    if (!(bp->lambda >= 0.0) || !(bp->lambda * eps <= 1.0)) {
      throw ValidationError("environment: need 0 <= lambda * eps <= 1 (lambda = " + std::to_string(bp->lambda) + ")");
    }
  } else if (!std::get<CustomEnvironment>(spec).sample) {
    throw ValidationError("environment: custom sampler is empty");
  }
}

/// The values q_k for k in [k_lo, k_hi].
class Environment {
 public:
  Environment(double eps, long long k_lo, std::vector<double> q) : eps_(eps), k_lo_(k_lo), q_(std::move(q)) {
    if (!(eps > 0.0)) throw ValidationError("environment: eps must be positive");
    if (q_.empty()) throw ValidationError("environment: window is empty");
  }

  double eps() const { return eps_; }
  long long k_lo() const { return k_lo_; }
  long long k_hi() const { return k_lo_ + static_cast<long long>(q_.size()) - 1; }
  bool covers(long long k) const { return k >= k_lo() && k <= k_hi(); }
  const std::vector<double>& values() const { return q_; }

  double q(long long k) const {
    if (!covers(k)) throw RangeError("environment: index " + std::to_string(k) + " is outside the window");
    return q_[static_cast<std::size_t>(k - k_lo_)];
  }

  // Probability that the walk at k steps to k + 1.
  double right_probability(long long k) const { return 1.0 / (std::exp(q(k)) + 1.0); }

  Potential potential() const;

 private:
  double eps_;
  long long k_lo_;
  std::vector<double> q_;
};

/// The piecewise-constant potential of q on cells [k_lo - 1, k_hi]; requires
/// k_lo <= 1 and k_hi >= 0 so the sums from the origin are defined.
inline Potential potential_from_q(const std::vector<double>& q, long long k_lo, double eps) {
  if (!(eps > 0.0)) throw ValidationError("potential_from_q: eps must be positive");
  if (q.empty()) throw ValidationError("potential_from_q: q is empty");
  const long long k_hi = k_lo + static_cast<long long>(q.size()) - 1;
  if (k_lo > 1 || k_hi < 0) throw ValidationError("potential_from_q: the window must reach the origin");
  auto at = [&](long long k) { return q[static_cast<std::size_t>(k - k_lo)]; };
  const long long first = k_lo - 1;
  std::vector<double> cells(static_cast<std::size_t>(k_hi - first + 1), 0.0);
  auto cell = [&](long long j) -> double& { return cells[static_cast<std::size_t>(j - first)]; };
  for (long long j = 1; j <= k_hi; ++j) cell(j) = cell(j - 1) + at(j);
  for (long long j = -1; j >= first; --j) cell(j) = cell(j + 1) - at(j + 1);
  return Potential::piecewise_constant(eps, first, std::move(cells));
}

inline Potential Environment::potential() const { return potential_from_q(q_, k_lo_, eps_); }

/// Draws q_k for k = k_lo..k_hi in increasing k from `rng`.
inline Environment sample_environment(const EnvironmentSpec& spec, double eps, long long k_lo, long long k_hi,
                                      Rng& rng) {
  check_environment(spec, eps);
  if (k_hi < k_lo) throw ValidationError("sample_environment: empty window");
  std::vector<double> q;
  q.reserve(static_cast<std::size_t>(k_hi - k_lo + 1));
  const double root = std::sqrt(eps);
  for (long long k = k_lo; k <= k_hi; ++k) {
    if (const auto* iid = std::get_if<IidScaled>(&spec)) {
      q.push_back(root * (iid->base ? iid->base(rng) : iid->sigma * rng.normal()));
    } else if (const auto* bp = std::get_if<BernoulliPoisson>(&spec)) {
      q.push_back(rng.bernoulli(bp->lambda * eps) ? bp->q : 0.0);
    } else {
      q.push_back(std::get<CustomEnvironment>(spec).sample(eps, k, rng));
    }
  }
  return Environment(eps, k_lo, std::move(q));
}

struct QuenchedRun {
  Environment environment;
  PathBatch paths;
  long long start_index = 0;
};

struct RwreOptions {
  double exit_probability = 1e-6;  // target for the window size
  double memory_cap = 1e8;         // largest window (number of sites)
};

// Stream tags: environment draws and walk paths get independent streams.
inline constexpr std::uint64_t kEnvironmentTag = 0xe7e7;
inline constexpr std::uint64_t kWalkTag = 0x3a1c;
inline constexpr std::uint64_t kSchemeTag = 0x5c4e;

/// Half-width K of the window so that a walk of N steps leaves [-K, K]
/// around its start with probability below `exit_probability`:
/// 4 exp(-K^2 / (2N)) <= p (reflection plus Hoeffding), capped at N.
inline long long rwre_window(double eps, double horizon, double exit_probability) {
  const double steps = std::ceil(horizon / (eps * eps) - 1e-9);
  const double k = std::ceil(std::sqrt(2.0 * steps * std::log(4.0 / exit_probability)));
  return static_cast<long long>(std::min(steps, k)) + 1;
}

/// For each of `environments` draws: sample the environment on an
/// auto-sized window, then run `paths_per_env` walks in it from `start`
/// (which must be a lattice point eps k). Exits from the window are explosions.
inline std::vector<QuenchedRun> rwre_simulate(const EnvironmentSpec& spec, double eps, double start, double horizon,
                                              std::size_t environments, std::size_t paths_per_env,
                                              const SimConfig& config, const RwreOptions& options = {}) {
  check_environment(spec, eps);
  if (environments < 1 || paths_per_env < 1) throw ValidationError("rwre_simulate: counts must be >= 1");
  if (!(horizon > 0.0)) throw ValidationError("rwre_simulate: horizon must be positive");
  const auto start_index = static_cast<long long>(std::llround(start / eps));
  if (std::abs(start - eps * static_cast<double>(start_index)) > 1e-9 * eps) {
    throw ValidationError("rwre_simulate: start must be a lattice point");
  }
  const long long half = rwre_window(eps, horizon, options.exit_probability) + std::llabs(start_index);
  if (2.0 * static_cast<double>(half) + 1.0 > options.memory_cap) {
    throw ValidationError("rwre_simulate: the environment window (" + std::to_string(2 * half + 1) +
                          " sites) exceeds the memory cap; use a larger eps or a shorter horizon");
  }
  std::vector<QuenchedRun> runs;
  for (std::size_t e = 0; e < environments; ++e) {
    Rng env_rng(derive_seed(config.seed, kEnvironmentTag, e), 0);
    Environment env = sample_environment(spec, eps, -half, half, env_rng);
    SimConfig walk = config;
    walk.paths = paths_per_env;
    walk.seed = derive_seed(config.seed, kWalkTag, e);
    PathBatch batch = simulate_chain(StartSpec::at(eps * static_cast<double>(start_index)), eps * eps, horizon, walk,
                                     [&env, eps] {
                                       return [&env, eps](const Point& x, Rng& rng) -> std::optional<Point> {
                                         const auto k = static_cast<long long>(std::llround(x[0] / eps));
                                         const double u = rng.uniform();
                                         if (!env.covers(k)) return std::nullopt;
                                         const long long next = u < env.right_probability(k) ? k + 1 : k - 1;
                                         return point1(eps * static_cast<double>(next));
                                       };
                                     });
    runs.push_back({std::move(env), std::move(batch), start_index});
  }
  return runs;
}

struct CrossValidationReport {
  double t = 0.0;
  KsResult ks;
  double wasserstein = 0.0;
  double kernel_gap = 0.0;  // max |p(eps k) - 1 / (e^{q_k} + 1)| over checked sites
  double psi_gap = 0.0;     // max |psi(eps k) - eps| over checked sites
  std::size_t walk_alive = 0;
  std::size_t scheme_alive = 0;
};

/// Runs the psi/p scheme in the run's potential from the same start (shifted
/// by `start_offset`, zero for a lattice start) and compares its marginal at t
/// with the walk's. Kernel gaps are measured on up to `sites` lattice points
/// around the start.
inline CrossValidationReport quenched_cross_validate(const QuenchedRun& run, double t, std::size_t paths,
                                                     std::uint64_t seed, unsigned threads = 1,
                                                     double start_offset = 0.0, long long sites = 200) {
  const Environment& env = run.environment;
  const double eps = env.eps();
  const Potential V = env.potential();
  CrossValidationReport report;
  report.t = t;
  // Interior sites only: psi at the outermost sites needs cells past the window.
  for (long long k = std::max(env.k_lo() + 1, run.start_index - sites);
       k <= std::min(env.k_hi() - 1, run.start_index + sites); ++k) {
    const double a = eps * static_cast<double>(k);
    const auto step = potential_step(V, a, eps);
    report.kernel_gap = std::max(report.kernel_gap, std::abs(step.p - env.right_probability(k)));
    report.psi_gap = std::max({report.psi_gap, std::abs(step.psi_up - eps), std::abs(step.psi_down - eps)});
  }
  SimConfig config;
  config.paths = paths;
  config.seed = derive_seed(seed, kSchemeTag, 0);
  config.grid = run.paths.grid;
  config.threads = threads;
  const double horizon = run.paths.grid->back();
  const PathBatch scheme =
      potential_chain_simulate(V, StartSpec::at(eps * static_cast<double>(run.start_index) + start_offset), eps,
                               horizon, config);
  const std::size_t i = run.paths.time_index(t);
  const auto walk = run.paths.marginal(i);
  const auto other = scheme.marginal(scheme.time_index(t));
  report.walk_alive = walk.size();
  report.scheme_alive = other.size();
  if (walk.empty() || other.empty()) throw NumericError("quenched_cross_validate: no surviving paths at t");
  report.ks = ks_distance(walk, other);
  report.wasserstein = wasserstein1(walk, other);
  return report;
}

struct QuenchedSummary {
  double quenched_mean = 0.0;      // average over environments of per-environment means
  double quenched_variance = 0.0;  // average of per-environment variances
  double annealed_mean = 0.0;      // pooled over all paths
  double annealed_variance = 0.0;
};

/// Per-environment statistics averaged over environments, next to the pooled ones.
inline QuenchedSummary quenched_annealed_summary(const std::vector<QuenchedRun>& runs, double t) {
  QuenchedSummary s;
  std::vector<double> pooled;
  std::size_t used = 0;
  for (const auto& run : runs) {
    const auto m = run.paths.marginal(run.paths.time_index(t));
    if (m.empty()) continue;
    s.quenched_mean += mean_with_error(m).mean;
    s.quenched_variance += sample_variance(m);
    pooled.insert(pooled.end(), m.begin(), m.end());
    ++used;
  }
  if (used == 0) return s;
  s.quenched_mean /= static_cast<double>(used);
  s.quenched_variance /= static_cast<double>(used);
  s.annealed_mean = mean_with_error(pooled).mean;
  s.annealed_variance = sample_variance(pooled);
  return s;
}

}  // namespace levylab
