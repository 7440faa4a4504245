#pragma once

// State space R^d plus the cemetery point, and recorded sample paths.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "levylab/errors.hpp"

namespace levylab {

using Point = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

inline Point point1(double x) {
  Point p(1);
  p[0] = x;
  return p;
}

/// A point of R^d or the cemetery state. The cemetery is a distinct value,
/// not a coordinate sentinel, so code has to ask before reading coordinates.
class State {
 public:
  State(Point x) : x_(std::move(x)) {}

  static State cemetery() { return State(); }

  bool is_cemetery() const { return !x_.has_value(); }
  explicit operator bool() const { return x_.has_value(); }

  const Point& point() const {
    if (!x_) throw ValidationError("cemetery state has no coordinates");
    return *x_;
  }

  friend bool operator==(const State& a, const State& b) {
    if (a.is_cemetery() || b.is_cemetery()) return a.is_cemetery() == b.is_cemetery();
    return a.x_->size() == b.x_->size() && *a.x_ == *b.x_;
  }

 private:
  State() = default;
  std::optional<Point> x_;
};

/// Axis-aligned box [lo, hi] in R^d.
struct Box {
  Point lo;
  Point hi;

  std::size_t dim() const { return static_cast<std::size_t>(lo.size()); }

  bool contains(const Point& x) const {
    return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
  }
  // Interior membership, for the open sets U of the stopped martingale problem.
  bool contains_open(const Point& x) const {
    return (x.array() > lo.array()).all() && (x.array() < hi.array()).all();
  }
  bool empty() const { return (hi.array() < lo.array()).any(); }

  double distance_to(const Point& x) const {
    const Eigen::ArrayXd below = (lo - x).array().max(0.0);
    const Eigen::ArrayXd above = (x - hi).array().max(0.0);
    return std::sqrt((below + above).square().sum());
  }
  double farthest_distance(const Point& x) const {
    const Eigen::ArrayXd span = (x - lo).array().abs().max((x - hi).array().abs());
    return std::sqrt(span.square().sum());
  }
  double distance_to(const Box& other) const {
    const Eigen::ArrayXd gap = (other.lo - hi).array().max((lo - other.hi).array()).max(0.0);
    return std::sqrt(gap.square().sum());
  }

  static Box cube(std::size_t dim, double lo, double hi) {
    return {Point::Constant(static_cast<Eigen::Index>(dim), lo), Point::Constant(static_cast<Eigen::Index>(dim), hi)};
  }
};

/// Largest k >= 0 with k * step <= t, up to a relative slack of 1e-12 so
/// that t = 1 with step 0.05 * 0.05 (which rounds up) still counts 400 steps.
inline std::size_t floor_index(double t, double step) {
  if (!(step > 0.0)) throw ValidationError("floor_index: step must be positive");
  if (t < 0.0) throw RangeError("floor_index: negative time");
  const double reach = t * (1.0 + 1e-12);
  double k = std::floor(reach / step);
  while ((k + 1.0) * step <= reach) k += 1.0;
  while (k > 0.0 && k * step > reach) k -= 1.0;
  return static_cast<std::size_t>(k);
}

using TimeGrid = std::shared_ptr<const std::vector<double>>;

inline TimeGrid make_grid(std::vector<double> times) {
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw ValidationError("time grid must be strictly increasing");
  }
  if (!times.empty() && times.front() < 0.0) throw ValidationError("time grid must start at t >= 0");
  return std::make_shared<const std::vector<double>>(std::move(times));
}

// 0, dt, 2 dt, ..., T (T included when it is within rounding of a multiple of dt).
inline TimeGrid uniform_grid(double horizon, double dt) {
  if (!(horizon > 0.0) || !(dt > 0.0)) throw ValidationError("uniform_grid: horizon and dt must be positive");
  std::vector<double> times;
  const auto count = static_cast<std::size_t>(std::floor(horizon / dt + 1e-9));
  times.reserve(count + 2);
  for (std::size_t k = 0; k <= count; ++k) times.push_back(std::min(horizon, static_cast<double>(k) * dt));
  if (times.back() < horizon * (1.0 - 1e-12)) times.push_back(horizon);
  return make_grid(std::move(times));
}

/// A cadlag path recorded on a time grid, with explosion time xi.
///
/// Absorption is structural: the state at grid time t is the cemetery exactly
/// when t >= xi, so a path can never come back from the cemetery.
class PathRecord {
 public:
  PathRecord(std::size_t dim, TimeGrid grid)
      : dim_(dim), grid_(std::move(grid)), coords_(dim_ * grid_->size(), 0.0) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return grid_->size(); }
  std::span<const double> times() const { return *grid_; }
  const TimeGrid& grid() const { return grid_; }
  double explosion_time() const { return xi_; }

  bool alive(std::size_t i) const { return (*grid_)[i] < xi_; }

  void set(std::size_t i, const Point& x) {
    if (!alive(i)) throw ValidationError("PathRecord: cannot set coordinates after explosion");
    for (std::size_t j = 0; j < dim_; ++j) coords_[i * dim_ + j] = x[static_cast<Eigen::Index>(j)];
  }

  void set(std::size_t i, const State& s) {
    if (s.is_cemetery()) {
      if (alive(i)) throw ValidationError("PathRecord: cemetery state before the explosion time");
      return;
    }
    set(i, s.point());
  }

  // Marks the path as exploded at time xi; grid states at t >= xi become the cemetery.
  void explode(double xi) {
    if (xi < 0.0) throw ValidationError("PathRecord: negative explosion time");
    xi_ = std::min(xi_, xi);
  }

  double coord(std::size_t i, std::size_t j) const { return coords_[i * dim_ + j]; }

  State state(std::size_t i) const {
    if (!alive(i)) return State::cemetery();
    Point x(static_cast<Eigen::Index>(dim_));
    for (std::size_t j = 0; j < dim_; ++j) x[static_cast<Eigen::Index>(j)] = coords_[i * dim_ + j];
    return x;
  }

  // True when every recorded state before xi is a point and every one after is the cemetery.
  bool absorption_holds() const {
    bool dead = false;
    for (std::size_t i = 0; i < size(); ++i) {
      if (dead && alive(i)) return false;
      dead = !alive(i);
    }
    return true;
  }

 private:
  std::size_t dim_;
  TimeGrid grid_;
  std::vector<double> coords_;
  double xi_ = kInfinity;
};

/// Paths sharing one dimension and one time grid; index = path id.
struct PathBatch {
  std::size_t dim = 1;
  TimeGrid grid;
  std::vector<PathRecord> paths;

  std::size_t size() const { return paths.size(); }

  std::size_t time_index(double t) const {
    const auto& times = *grid;
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (std::abs(times[i] - t) <= 1e-12 * std::max(1.0, std::abs(t))) return i;
    }
    throw RangeError("PathBatch: time " + std::to_string(t) + " is not on the output grid");
  }

  // Coordinate `coord` at grid index i of every path still alive there.
  std::vector<double> marginal(std::size_t i, std::size_t coord = 0) const {
    std::vector<double> values;
    values.reserve(paths.size());
    for (const auto& p : paths) {
      if (p.alive(i)) values.push_back(p.coord(i, coord));
    }
    return values;
  }
};

}  // namespace levylab
