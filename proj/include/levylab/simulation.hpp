#pragma once

// Shared driver for discrete-time chains embedded in continuous time as
// t -> X_{floor(t / step_time)}, with per-path random streams and the
// escape-radius rule for explosion.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>

#include "levylab/errors.hpp"
#include "levylab/parallel.hpp"
#include "levylab/rng.hpp"
#include "levylab/state.hpp"

namespace levylab {

struct SimConfig {
  std::size_t paths = 1000;
  std::uint64_t seed = 0;
  TimeGrid grid;  // output times; defaults to a grid chosen by each simulator
  double escape_radius = 1e6;
  unsigned threads = 1;  // 0: hardware concurrency
};

/// Starting point: a fixed point or a law sampled from the path's own stream.
struct StartSpec {
  std::size_t dim = 1;
  std::function<Point(Rng&)> sample;

  static StartSpec at(Point x) {
    const auto d = static_cast<std::size_t>(x.size());
    return {d, [x = std::move(x)](Rng&) { return x; }};
  }
  static StartSpec at(double x) { return at(point1(x)); }
  static StartSpec from(std::size_t dim, std::function<Point(Rng&)> sampler) { return {dim, std::move(sampler)}; }
};

inline TimeGrid resolve_grid(const SimConfig& config, double horizon, std::size_t default_points = 101) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ValidationError("horizon T must be positive and finite");
  if (config.paths < 1) throw ValidationError("path count must be >= 1");
  if (!(config.escape_radius > 0.0)) throw ValidationError("escape radius must be positive");
  if (config.grid) {
    if (config.grid->empty()) throw ValidationError("output grid is empty");
    if (config.grid->back() > horizon * (1.0 + 1e-12)) throw RangeError("output grid extends past the horizon");
    return config.grid;
  }
  return uniform_grid(horizon, horizon / static_cast<double>(default_points - 1));
}

/// Runs `config.paths` independent chains. `make_stepper()` is called once
/// per work chunk and returns a callable `(const Point& x, Rng&) ->
/// std::optional<Point>`, where nullopt means a jump to the cemetery; the
/// stepper may therefore keep chunk-local caches.
///
/// Path p draws its start and all steps from Rng(seed, p). A step that lands
/// at the cemetery or outside the escape radius at step k explodes the path at
/// time k * step_time.
template <typename MakeStepper>
PathBatch simulate_chain(const StartSpec& start, double step_time, double horizon, const SimConfig& config,
                         MakeStepper&& make_stepper) {
  if (!(step_time > 0.0) || !std::isfinite(step_time)) throw ValidationError("step time must be positive and finite");
  if (!start.sample) throw ValidationError("start specification has no sampler");
  const TimeGrid grid = resolve_grid(config, horizon);
  PathBatch batch{start.dim, grid, {}};
  batch.paths.assign(config.paths, PathRecord(start.dim, grid));
  const auto& times = *grid;
  std::vector<std::size_t> step_of(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) step_of[i] = floor_index(times[i], step_time);

  parallel_for_chunks(config.paths, config.threads, [&](std::size_t begin, std::size_t end) {
    auto step = make_stepper();
    for (std::size_t p = begin; p < end; ++p) {
      Rng rng(config.seed, p);
      Point x = start.sample(rng);
      if (static_cast<std::size_t>(x.size()) != start.dim) throw ValidationError("start point has the wrong dimension");
      PathRecord& record = batch.paths[p];
      std::size_t k = 0;
      std::size_t gi = 0;
      if (!(x.norm() <= config.escape_radius)) {
        record.explode(0.0);
        continue;
      }
      for (;;) {
        while (gi < times.size() && step_of[gi] <= k) record.set(gi++, x);
        if (gi == times.size()) break;
        std::optional<Point> next = step(x, rng);
        ++k;
        if (!next || !(next->norm() <= config.escape_radius)) {
          record.explode(static_cast<double>(k) * step_time);
          break;
        }
        x = std::move(*next);
      }
    }
  });
  return batch;
}

}  // namespace levylab
